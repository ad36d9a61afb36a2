//! From-scratch one-dimensional convolutional network: layers with
//! hand-derived backward passes, MSE + L2 objective, adaptive-moment
//! optimization, and an early-stopping training loop.

pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod model;
pub mod tensor;
pub mod train;

pub use adam::{adam_update, Adam};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use layers::{BatchNorm1d, Conv1d, Dense, Dropout, Flatten, ParamKind, ParamSlot, ParamView, Relu};
pub use loss::{mse, mse_grad, mse_l2_loss};
pub use model::{CnnModel, LayerNode, LayerSpec, ModelState};
pub use tensor::Tensor;
pub use train::{train, EpochStats, TrainConfig, TrainingHistory};
