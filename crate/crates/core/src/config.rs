//! Declarative run configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ModelSpec, TrainConfig};
use crate::repr::{ReprConfig, RepresentationKind};
use crate::signal::FEATURES;
use crate::synth::{default_noise, EventPlan, SynthConfig, POSES};
use crate::windowing::WindowingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// A hand-written session added to the generated ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSession {
    pub split: Split,
    pub config: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSetup {
    pub poses: Vec<u8>,
    pub train_sessions: usize,
    pub test_sessions: usize,
    /// Events per (gesture, direction) pair in each session.
    pub repeats: usize,
    pub sample_rate: f64,
    pub noise_std: [f64; FEATURES],
    pub plan: EventPlan,
    pub custom: Vec<CustomSession>,
}

impl Default for SynthSetup {
    fn default() -> Self {
        Self {
            poses: POSES.to_vec(),
            train_sessions: 2,
            test_sessions: 1,
            repeats: 2,
            sample_rate: 200.0,
            noise_std: default_noise(),
            plan: EventPlan::default(),
            custom: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: PathBuf,
    pub model: PathBuf,
    pub reports: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data"),
            model: PathBuf::from("model.bin"),
            reports: PathBuf::from("reports"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: String,
    pub train_poses: Vec<u8>,
    pub test_poses: Vec<u8>,
    pub vote: bool,
    pub windowing: WindowingConfig,
    pub representation: ReprConfig,
    /// Tensors to build for training; defaults to the model's own
    /// representation.
    pub tensors: Option<RepresentationKind>,
    pub train: TrainConfig,
    pub synth: SynthSetup,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: "stft2dcnn".into(),
            train_poses: vec![1],
            test_poses: vec![1],
            vote: true,
            windowing: WindowingConfig::default(),
            representation: ReprConfig::default(),
            tensors: None,
            train: TrainConfig::default(),
            synth: SynthSetup::default(),
            paths: Paths::default(),
        }
    }
}

fn check_poses(what: &str, poses: &[u8]) -> Result<()> {
    if let Some(p) = poses.iter().find(|p| !POSES.contains(p)) {
        return Err(Error::ConfigInvalid(format!("{what}: pose {p} not in 1..=4")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig is always representable in TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.windowing.validate()?;
        let spec = ModelSpec::named(&self.model)?;
        spec.audit(spec.representation, spec.representation.dims(&self.windowing))?;
        if let Some(kind) = self.tensors {
            spec.check_representation(kind)?;
        }
        check_poses("train_poses", &self.train_poses)?;
        check_poses("test_poses", &self.test_poses)?;
        check_poses("synth.poses", &self.synth.poses)?;
        if self.train.batch_size == 0 || self.train.epochs == 0 {
            return Err(Error::ConfigInvalid(
                "train.batch_size and train.epochs must be >= 1".into(),
            ));
        }
        if !(self.train.learning_rate.is_finite() && self.train.learning_rate >= 0.0) {
            return Err(Error::ConfigInvalid(
                "train.learning_rate must be finite and >= 0".into(),
            ));
        }
        for (i, c) in self.synth.custom.iter().enumerate() {
            c.config
                .validate()
                .map_err(|e| Error::ConfigInvalid(format!("synth.custom[{i}]: {e}")))?;
        }
        let p = &self.paths;
        if p.data == p.reports || p.model == p.data || p.model == p.reports {
            return Err(Error::ConfigInvalid(
                "paths.data, paths.model and paths.reports must differ".into(),
            ));
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::named(&self.model)
    }
}
