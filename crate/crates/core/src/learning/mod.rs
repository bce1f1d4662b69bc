//! From-scratch networks, the equivariant wrapper, training and evaluation.

pub mod adam;
pub mod dataset;
pub mod mlp;
pub mod model;
pub mod spectral;
pub mod train;

pub use dataset::{compute_label, Dataset, DatasetRow};
pub use mlp::{Gradients, Layer, Mlp};
pub use model::{BaselineModel, EquivariantModel, ForcePredictor, Model, ModelKind};
pub use spectral::spectral_normalize;
pub use train::{backward, evaluate, mse_loss, train, EvalMetrics, TrainConfig, TrainOutcome};
