//! Parameter and per-frame FLOP accounting.
//!
//! FLOPs are counted as 2 x multiply-accumulates of convolution, dense and
//! LSTM layers. Bias additions, activations, pooling and softmax are not counted.

use crate::models::arch::ModelSpec;
use crate::nn::LayerKind;

pub const FLOP_CONVENTION: &str = "FLOPs = 2 x multiply-accumulates (conv, dense, LSTM); biases, activations and pooling excluded";

pub fn count_params(spec: &ModelSpec) -> usize {
    spec.layers.iter().map(LayerKind::param_count).sum()
}

/// Multiply-accumulates needed to score one frame.
pub fn count_macs_per_frame(spec: &ModelSpec) -> usize {
    // track the length axis for convolutions
    let mut len = spec.input_dim;
    let mut macs = 0;
    for layer in &spec.layers {
        match *layer {
            LayerKind::Conv1d { kernel, in_ch, out_ch } => macs += len * kernel * in_ch * out_ch,
            LayerKind::MaxPool1d { size } => len /= size,
            LayerKind::Dense { input, output } => macs += input * output,
            LayerKind::Lstm { input, hidden } => macs += 4 * hidden * (input + hidden),
            _ => {}
        }
    }
    macs
}

pub fn count_flops_per_frame(spec: &ModelSpec) -> usize {
    2 * count_macs_per_frame(spec)
}
