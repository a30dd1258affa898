//! End-to-end stages shared by the command-line tool, the streaming replay
//! and the experiment tests: dataset generation, training-set assembly,
//! training, and per-session prediction and evaluation.

use std::path::{Path, PathBuf};

use crate::config::{RunConfig, Split};
use crate::dataset::{load_series, save_series};
use crate::error::{Error, Result};
use crate::eval::{
    extract_events, majority_vote, to_sample_labels, ContactEvent, MetricAccumulator, MetricBundle, PredictionStream,
    WindowPrediction,
};
use crate::nn::{train, Model, Trace, TrainConfig, TrainOutcome};
use crate::repr::{Featurizer, Tensor3};
use crate::signal::{GestureClass, SignalSeries};
use crate::synth::{generate_session, plan_events, SynthConfig};
use crate::windowing::{segment_windows, WindowingConfig};

/// Stable seed for one generated session.
pub fn session_seed(run_seed: u64, pose: u8, split: Split, index: usize) -> u64 {
    // splitmix64 finalizer over the packed coordinates
    let split = match split {
        Split::Train => 0u64,
        Split::Test => 1,
    };
    let mut z = run_seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(u64::from(pose) << 40 | split << 32 | index as u64);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn session_file_name(pose: u8, split: Split, index: usize) -> String {
    format!("pose{pose}_{}_{index:02}.csv", split.as_str())
}

/// Synthesis configuration of generated session `index`.
pub fn session_config(run: &RunConfig, pose: u8, split: Split, index: usize) -> SynthConfig {
    let seed = session_seed(run.seed, pose, split, index);
    let (events, duration_s) = plan_events(&run.synth.plan, run.synth.repeats, seed);
    SynthConfig {
        seed,
        duration_s,
        sample_rate: run.synth.sample_rate,
        pose,
        events,
        noise_std: run.synth.noise_std,
        baseline: None,
    }
}

/// Every session the run describes for `poses`, with its file name.
pub fn planned_sessions(run: &RunConfig, poses: &[u8]) -> Vec<(String, SynthConfig)> {
    let mut out = Vec::new();
    for &pose in poses {
        for (split, count) in [
            (Split::Train, run.synth.train_sessions),
            (Split::Test, run.synth.test_sessions),
        ] {
            for i in 0..count {
                out.push((session_file_name(pose, split, i), session_config(run, pose, split, i)));
            }
        }
        let custom = run.synth.custom.iter().filter(|c| c.config.pose == pose);
        for (i, c) in custom.enumerate() {
            let name = format!("pose{pose}_{}_custom{i:02}.csv", c.split.as_str());
            out.push((name, c.config.clone()));
        }
    }
    out
}

/// Writes the planned sessions of `poses` into `dir`.
pub fn generate_dataset(run: &RunConfig, poses: &[u8], dir: &Path) -> Result<Vec<(PathBuf, SignalSeries)>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for (name, cfg) in planned_sessions(run, poses) {
        let mut series = generate_session(&cfg)?;
        let mut meta = series.meta().clone();
        meta.session = name.trim_end_matches(".csv").to_string();
        series.set_meta(meta);
        let path = dir.join(&name);
        save_series(&series, &path)?;
        out.push((path, series));
    }
    Ok(out)
}

/// Loads every `pose{p}_{split}_*.csv` in `dir` for the given poses, sorted by
/// file name.
pub fn load_split(dir: &Path, poses: &[u8], split: Split, sample_rate: f64) -> Result<Vec<SignalSeries>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let wanted = poses
            .iter()
            .any(|p| name.starts_with(&format!("pose{p}_{}_", split.as_str())) && name.ends_with(".csv"));
        if wanted {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::ConfigInvalid(format!(
            "no {} sessions for poses {poses:?} in {}",
            split.as_str(),
            dir.display()
        )));
    }
    paths.iter().map(|p| load_series(p, sample_rate)).collect()
}

/// Labeled representation tensors of every detection window.
pub fn training_set(
    series: &[SignalSeries],
    featurizer: &Featurizer,
    windowing: &WindowingConfig,
) -> Result<Vec<(Tensor3, GestureClass)>> {
    let mut out = Vec::new();
    for s in series {
        for w in segment_windows(s, windowing)? {
            out.push((featurizer.build(w.frames)?, w.label));
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

/// Trains the configured model on `series`.
pub fn train_on(run: &RunConfig, series: &[SignalSeries]) -> Result<TrainOutcome> {
    let spec = run.spec()?;
    let kind = run.tensors.unwrap_or(spec.representation);
    spec.check_representation(kind)?;
    let featurizer = Featurizer::new(kind, run.windowing, run.representation)?;
    let set = training_set(series, &featurizer, &run.windowing)?;
    let cfg = TrainConfig {
        seed: run.seed,
        ..run.train
    };
    train(spec, run.windowing, run.representation, &set, &cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPrediction {
    pub raw: PredictionStream,
    /// Voted stream, or a copy of `raw` when voting is off.
    pub output: PredictionStream,
    pub labels: Vec<GestureClass>,
    pub events: Vec<ContactEvent>,
}

/// Window-by-window inference over a whole series.
pub fn predict_series(model: &Model, series: &SignalSeries, vote: bool) -> Result<SeriesPrediction> {
    let featurizer = model.featurizer()?;
    let mut trace = Trace::default();
    let mut raw = PredictionStream {
        sample_rate: series.sample_rate(),
        windows: Vec::new(),
    };
    for w in segment_windows(series, &model.windowing)? {
        let (class, probs) = model.classify_window(&featurizer, w.frames, &mut trace)?;
        raw.windows.push(WindowPrediction {
            start: w.origin.start,
            class,
            probs,
        });
    }
    Ok(finish_prediction(raw, series.len(), vote))
}

pub(crate) fn finish_prediction(raw: PredictionStream, len: usize, vote: bool) -> SeriesPrediction {
    let output = if vote { majority_vote(&raw) } else { raw.clone() };
    let labels = to_sample_labels(&output, len);
    let events = extract_events(&labels);
    SeriesPrediction {
        raw,
        output,
        labels,
        events,
    }
}

/// Pooled metrics of a model over several sessions.
pub fn evaluate_model(
    model: &Model,
    series: &[SignalSeries],
    vote: bool,
) -> Result<(MetricBundle, Vec<SeriesPrediction>)> {
    let mut acc = MetricAccumulator::new();
    let mut preds = Vec::with_capacity(series.len());
    for s in series {
        let p = predict_series(model, s, vote)?;
        acc.add(s.labels(), &p.labels, s.sample_rate())?;
        preds.push(p);
    }
    Ok((acc.finish(), preds))
}
