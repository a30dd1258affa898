//! Tactile gesture recognition from a robot's internal joint sensors.
//!
//! Joint-sensor series are cut into fixed detection windows, turned into one
//! of three 3D representations (STFT spectrogram, pseudo-spectrogram, raw
//! stack), classified by small 3D CNNs and evaluated at the event level.

pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod knn;
pub mod nn;
pub mod pipeline;
pub mod repr;
pub mod signal;
pub mod stream;
pub mod synth;
pub mod windowing;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use eval::{ContactEvent, MetricBundle, PredictionStream};
pub use knn::KnnIndex;
pub use nn::{Model, ModelSpec};
pub use repr::{Featurizer, ReprConfig, RepresentationKind, Tensor3};
pub use signal::{FeatureFrame, GestureClass, SignalSeries};
pub use synth::{Direction, SynthConfig};
pub use windowing::WindowingConfig;
