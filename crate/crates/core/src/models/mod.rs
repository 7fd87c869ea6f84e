//! Named architectures, cost accounting and checkpoints.

mod arch;
mod checkpoint;
mod cost;

pub use arch::{InputMode, Model, ModelName, ModelSpec, DEFAULT_DROPOUT, LSTM_HIDDEN};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TrainingMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use cost::{count_flops_per_frame, count_macs_per_frame, count_params, FLOP_CONVENTION};
