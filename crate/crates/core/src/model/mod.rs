//! Binary classifiers: the constrained quadratic network and the MLP baseline,
//! with their losses, optimizer, training loop and file format.

pub mod io;
pub mod loss;
pub mod mlp;
pub mod optim;
pub mod quantum;
pub mod train;

pub use io::{read_model, write_model};
pub use loss::{bce_loss, sigmoid};
pub use mlp::{MlpBaselineModel, Mode};
pub use optim::{OptimizerState, ParamSlot, SgdConfig};
pub use quantum::QuantumShallowModel;
pub use train::{evaluate_set, train_binary, BinaryModel, EpochRecord, ModelKind, TrainConfig, TrainOutput};
