//! A small neural-network engine: 1D convolution, pooling, dense, dropout,
//! softmax and LSTM layers with hand-written backward passes, plus
//! cross-entropy and Adam.

mod adam;
pub mod gradcheck;
mod layers;
mod loss;
mod lstm;
mod network;
mod scalar;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use layers::{softmax_row, Conv1d, Dense, Dropout, Flatten, MaxPool1d, Relu, Softmax};
pub use loss::{cross_entropy, softmax_cross_entropy, PROB_FLOOR};
pub use lstm::Lstm;
pub use network::{Layer, LayerKind, Network};
pub use scalar::{gemm, Mat, Scalar};
pub use tensor::Tensor;
