//! Complex-valued dense networks for wavenumber regression.

pub mod activation;
pub mod adam;
pub mod dense;
pub mod input;
pub mod model;
pub mod train;

pub use activation::{mod_sigmoid, sigmoid};
pub use adam::{AdamConfig, AdamState};
pub use dense::{ComplexDenseNet, LAYER_WIDTHS};
pub use input::{covariance_input, normalize_input};
pub use model::{training_digest, NormalizationRecord, TrainedModel, MODEL_FORMAT_VERSION};
pub use train::{prepare_inputs, train, train_with_log, TrainConfig, TrainLogRecord};
