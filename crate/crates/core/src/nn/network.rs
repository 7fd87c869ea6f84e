use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::layers::{Conv1d, Dense, Dropout, Flatten, MaxPool1d, Relu, Softmax};
use crate::nn::lstm::Lstm;
use crate::nn::scalar::Scalar;
use crate::nn::tensor::Tensor;

/// Serializable description of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
pub enum LayerKind {
    /// Convolution followed by ReLU.
    Conv1d { kernel: usize, in_ch: usize, out_ch: usize },
    MaxPool1d { size: usize },
    Flatten,
    Dense { input: usize, output: usize },
    Relu,
    Dropout { rate: f64 },
    Softmax,
    Lstm { input: usize, hidden: usize },
}

impl LayerKind {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerKind::Conv1d { kernel, in_ch, out_ch } => kernel * in_ch * out_ch + out_ch,
            LayerKind::Dense { input, output } => input * output + output,
            LayerKind::Lstm { input, hidden } => 4 * hidden * (input + hidden) + 4 * hidden,
            _ => 0,
        }
    }

    /// Sizes of the parameter blocks in storage order.
    pub fn param_blocks(&self) -> Vec<usize> {
        match *self {
            LayerKind::Conv1d { kernel, in_ch, out_ch } => vec![kernel * in_ch * out_ch, out_ch],
            LayerKind::Dense { input, output } => vec![input * output, output],
            LayerKind::Lstm { input, hidden } => vec![input * 4 * hidden, hidden * 4 * hidden, 4 * hidden],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerKind::Conv1d { kernel, out_ch, .. } => write!(f, "Conv({kernel}, {out_ch})"),
            LayerKind::MaxPool1d { .. } => f.write_str("Pool"),
            LayerKind::Flatten => f.write_str("Flatten"),
            LayerKind::Dense { output, .. } => write!(f, "Dense({output})"),
            LayerKind::Relu => f.write_str("ReLU"),
            LayerKind::Dropout { .. } => f.write_str("Dropout"),
            LayerKind::Softmax => f.write_str("Softmax"),
            LayerKind::Lstm { hidden, .. } => write!(f, "LSTM({hidden})"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv1d(Conv1d<T>),
    MaxPool1d(MaxPool1d),
    Flatten(Flatten),
    Dense(Dense<T>),
    Relu(Relu),
    Dropout(Dropout<T>),
    Softmax(Softmax<T>),
    Lstm(Lstm<T>),
}

impl<T: Scalar> Layer<T> {
    /// Zero-initialized layer of the given kind.
    pub fn from_kind(kind: LayerKind) -> Self {
        match kind {
            LayerKind::Conv1d { kernel, in_ch, out_ch } => Layer::Conv1d(Conv1d::new(kernel, in_ch, out_ch, true)),
            LayerKind::MaxPool1d { size } => Layer::MaxPool1d(MaxPool1d::new(size)),
            LayerKind::Flatten => Layer::Flatten(Flatten::default()),
            LayerKind::Dense { input, output } => Layer::Dense(Dense::new(input, output)),
            LayerKind::Relu => Layer::Relu(Relu::default()),
            LayerKind::Dropout { rate } => Layer::Dropout(Dropout::new(rate)),
            LayerKind::Softmax => Layer::Softmax(Softmax::new()),
            LayerKind::Lstm { input, hidden } => Layer::Lstm(Lstm::new(input, hidden)),
        }
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv1d(c) => LayerKind::Conv1d { kernel: c.kernel, in_ch: c.in_ch, out_ch: c.out_ch },
            Layer::MaxPool1d(p) => LayerKind::MaxPool1d { size: p.size },
            Layer::Flatten(_) => LayerKind::Flatten,
            Layer::Dense(d) => LayerKind::Dense { input: d.input, output: d.output },
            Layer::Relu(_) => LayerKind::Relu,
            Layer::Dropout(d) => LayerKind::Dropout { rate: d.rate },
            Layer::Softmax(_) => LayerKind::Softmax,
            Layer::Lstm(l) => LayerKind::Lstm { input: l.input, hidden: l.hidden },
        }
    }

    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, train: bool, rng: &mut R) -> Result<Tensor<T>> {
        let y = match self {
            Layer::Conv1d(l) => l.forward(x),
            Layer::MaxPool1d(l) => l.forward(x),
            Layer::Flatten(l) => l.forward(x),
            Layer::Dense(l) => l.forward(x),
            Layer::Relu(l) => l.forward(x),
            Layer::Dropout(l) => l.forward(x, train, rng),
            Layer::Softmax(l) => l.forward(x),
            Layer::Lstm(l) => l.forward(x),
        }?;
        y.debug_check_finite("layer forward");
        Ok(y)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv1d(l) => l.backward(grad),
            Layer::MaxPool1d(l) => l.backward(grad),
            Layer::Flatten(l) => l.backward(grad),
            Layer::Dense(l) => l.backward(grad),
            Layer::Relu(l) => l.backward(grad),
            Layer::Dropout(l) => l.backward(grad),
            Layer::Softmax(l) => l.backward(grad),
            Layer::Lstm(l) => l.backward(grad),
        }
    }

    /// Parameter blocks paired with their gradient accumulators.
    pub fn params_and_grads(&mut self) -> Vec<(&mut [T], &mut [T])> {
        match self {
            Layer::Conv1d(c) => vec![(&mut c.weight[..], &mut c.grad_weight[..]), (&mut c.bias[..], &mut c.grad_bias[..])],
            Layer::Dense(d) => vec![(&mut d.weight[..], &mut d.grad_weight[..]), (&mut d.bias[..], &mut d.grad_bias[..])],
            Layer::Lstm(l) => vec![
                (&mut l.w_x[..], &mut l.grad_w_x[..]),
                (&mut l.w_h[..], &mut l.grad_w_h[..]),
                (&mut l.bias[..], &mut l.grad_bias[..]),
            ],
            _ => Vec::new(),
        }
    }

    pub fn params(&self) -> Vec<&[T]> {
        match self {
            Layer::Conv1d(c) => vec![&c.weight[..], &c.bias[..]],
            Layer::Dense(d) => vec![&d.weight[..], &d.bias[..]],
            Layer::Lstm(l) => vec![&l.w_x[..], &l.w_h[..], &l.bias[..]],
            _ => Vec::new(),
        }
    }

    /// He-uniform for convolutions and dense layers; `U(-1/sqrt(H), 1/sqrt(H))`
    /// for LSTMs with the forget-gate bias set to 1.
    pub fn init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut fill = |buf: &mut [T], limit: f64| {
            for v in buf.iter_mut() {
                *v = T::from_f64_lossy(rng.gen_range(-limit..limit));
            }
        };
        match self {
            Layer::Conv1d(c) => {
                fill(&mut c.weight, (6.0 / (c.kernel * c.in_ch) as f64).sqrt());
                c.bias.iter_mut().for_each(|b| *b = T::zero());
            }
            Layer::Dense(d) => {
                fill(&mut d.weight, (6.0 / d.input as f64).sqrt());
                d.bias.iter_mut().for_each(|b| *b = T::zero());
            }
            Layer::Lstm(l) => {
                let limit = 1.0 / (l.hidden as f64).sqrt();
                fill(&mut l.w_x, limit);
                fill(&mut l.w_h, limit);
                let h = l.hidden;
                for (j, b) in l.bias.iter_mut().enumerate() {
                    *b = if (h..2 * h).contains(&j) { T::one() } else { T::zero() };
                }
            }
            _ => {}
        }
    }
}

/// A sequential stack of layers.
#[derive(Debug, Clone)]
pub struct Network<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn from_kinds(kinds: &[LayerKind]) -> Self {
        Self { layers: kinds.iter().map(|&k| Layer::from_kind(k)).collect() }
    }

    pub fn kinds(&self) -> Vec<LayerKind> {
        self.layers.iter().map(Layer::kind).collect()
    }

    pub fn init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for layer in &mut self.layers {
            layer.init(rng);
        }
    }

    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, train: bool, rng: &mut R) -> Result<Tensor<T>> {
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward(&cur, train, rng)?;
        }
        Ok(cur)
    }

    /// Backpropagates from the output of layer `from - 1` down to the input.
    pub fn backward_from(&mut self, from: usize, grad: Tensor<T>) -> Result<Tensor<T>> {
        let mut cur = grad;
        for layer in self.layers[..from].iter_mut().rev() {
            cur = layer.backward(&cur)?;
        }
        Ok(cur)
    }

    pub fn backward(&mut self, grad: Tensor<T>) -> Result<Tensor<T>> {
        let n = self.layers.len();
        self.backward_from(n, grad)
    }

    pub fn zero_grad(&mut self) {
        for layer in &mut self.layers {
            for (_, g) in layer.params_and_grads() {
                g.iter_mut().for_each(|v| *v = T::zero());
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.kind().param_count()).sum()
    }

    /// All parameters concatenated in layer order.
    pub fn flat_params(&self) -> Vec<T> {
        self.layers.iter().flat_map(|l| l.params().into_iter().flatten().copied()).collect()
    }

    pub fn load_flat_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(crate::Error::shape(format!(
                "{} parameters supplied, network holds {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut at = 0;
        for layer in &mut self.layers {
            for (p, _) in layer.params_and_grads() {
                p.copy_from_slice(&flat[at..at + p.len()]);
                at += p.len();
            }
        }
        Ok(())
    }

    pub fn grads_and_params(&mut self) -> Vec<(&mut [T], &[T])> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_and_grads())
            .map(|(p, g)| (p, &*g))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn param_counts() {
        assert_eq!(LayerKind::Dense { input: 1024, output: 2 }.param_count(), 2050);
        assert_eq!(LayerKind::Conv1d { kernel: 10, in_ch: 1, out_ch: 32 }.param_count(), 352);
        assert_eq!(LayerKind::Lstm { input: 64, hidden: 64 }.param_count(), 4 * 64 * 128 + 256);
    }

    #[test]
    fn flat_params_round_trip() {
        let kinds = [
            LayerKind::Conv1d { kernel: 3, in_ch: 1, out_ch: 2 },
            LayerKind::Flatten,
            LayerKind::Dense { input: 8, output: 2 },
            LayerKind::Softmax,
        ];
        let mut net = Network::<f32>::from_kinds(&kinds);
        net.init(&mut ChaCha8Rng::seed_from_u64(1));
        let flat = net.flat_params();
        assert_eq!(flat.len(), net.param_count());
        let mut other = Network::<f32>::from_kinds(&kinds);
        other.load_flat_params(&flat).unwrap();
        assert_eq!(other.flat_params(), flat);
        assert!(other.load_flat_params(&flat[1..]).is_err());
    }

    #[test]
    fn lstm_forget_bias_is_one() {
        let mut layer = Layer::<f32>::from_kind(LayerKind::Lstm { input: 2, hidden: 3 });
        layer.init(&mut ChaCha8Rng::seed_from_u64(0));
        if let Layer::Lstm(l) = layer {
            assert_eq!(l.bias, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        }
    }
}
