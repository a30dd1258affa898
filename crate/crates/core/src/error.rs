use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // ---- series validation ----
    #[error("frame {frame} has {found} joints, expected 7")]
    JointCountMismatch { frame: usize, found: usize },
    #[error("frame {frame} joint {joint} has {found} features, expected 4")]
    FeatureCountMismatch { frame: usize, joint: usize, found: usize },
    #[error("non-finite value at frame {frame}, channel {channel}")]
    NonFiniteValue { frame: usize, channel: usize },
    #[error("sampling gap of {gap_ms} ms between samples {index} and {} (limit {limit_ms} ms)", index + 1)]
    SamplingGap { index: usize, gap_ms: f64, limit_ms: f64 },
    #[error("sample {index}: contact flag {contact} disagrees with label {label}")]
    LabelFlagInconsistent { index: usize, contact: bool, label: u8 },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("empty series")]
    EmptySeries,
    #[error("unknown gesture class {0}")]
    UnknownClass(i64),

    // ---- configuration / shapes ----
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("representation mismatch: model expects {expected}, input is {found}")]
    RepresentationMismatch { expected: String, found: String },
    #[error("DFT input length {0} is odd")]
    OddLength(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    // ---- training ----
    #[error("training set is empty")]
    EmptyDataset,
    #[error("loss diverged at epoch {epoch} (value {loss})")]
    DivergedLoss { epoch: usize, loss: f64 },

    // ---- model files ----
    #[error("unsupported model format version {found} (this build reads {supported})")]
    FormatVersionMismatch { found: u32, supported: u32 },
    #[error("model file checksum or magic mismatch")]
    ChecksumMismatch,
    #[error("unknown model spec `{0}`")]
    SpecUnknown(String),
    #[error("malformed model file: {0}")]
    MalformedModel(String),

    // ---- metrics ----
    #[error("no true-positive contact samples; gesture metrics undefined")]
    EmptyTpRegion,

    // ---- io ----
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors that stem from an inconsistent configuration or tensor shape
    /// rather than from data or IO.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::ConfigInvalid(_)
                | Error::ShapeMismatch(_)
                | Error::RepresentationMismatch { .. }
                | Error::SpecUnknown(_)
                | Error::Toml(_)
        )
    }
}
