//! Minimal 3D-CNN engine: valid convolutions, max pooling, a dense
//! classifier head, Adam training, gradient checking and model files.

pub mod conv;
pub mod gradcheck;
pub mod io;
pub mod network;
pub mod spec;
pub mod train;

pub use conv::{conv3d_backward, conv3d_forward, ConvGeometry, ConvScratch};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use io::{decode_model, encode_model, load_model, save_model};
pub use network::{argmax_class, cross_entropy, softmax, Model, Network, Trace, TrainingMeta};
pub use spec::{LayerShape, LayerSpec, ModelSpec, Shape, MODEL_NAMES};
pub use train::{mean_loss, train, Adam, TrainConfig, TrainOutcome};
