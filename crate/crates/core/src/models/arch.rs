use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Layer, LayerKind, Network, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Arch1,
    Arch2,
    Arch3,
    Arch4,
    Arch5,
    Arch6,
    Lstm64x2,
}

impl ModelName {
    pub const CNNS: [ModelName; 6] = [
        ModelName::Arch1,
        ModelName::Arch2,
        ModelName::Arch3,
        ModelName::Arch4,
        ModelName::Arch5,
        ModelName::Arch6,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Arch1 => "arch1",
            ModelName::Arch2 => "arch2",
            ModelName::Arch3 => "arch3",
            ModelName::Arch4 => "arch4",
            ModelName::Arch5 => "arch5",
            ModelName::Arch6 => "arch6",
            ModelName::Lstm64x2 => "lstm64x2",
        }
    }

    /// `(kernel, filters)` per convolution, in order.
    pub fn conv_stack(self) -> &'static [(usize, usize)] {
        match self {
            ModelName::Arch1 => &[(10, 32), (5, 64)],
            ModelName::Arch2 => &[(20, 32), (10, 64)],
            ModelName::Arch3 | ModelName::Arch5 => &[(10, 32), (10, 32), (5, 64), (5, 64)],
            ModelName::Arch4 | ModelName::Arch6 => &[(20, 32), (20, 32), (10, 64), (10, 64)],
            ModelName::Lstm64x2 => &[],
        }
    }

    pub fn dense_stack(self) -> &'static [usize] {
        match self {
            ModelName::Arch1 | ModelName::Arch2 | ModelName::Arch3 | ModelName::Arch4 => &[1024],
            ModelName::Arch5 | ModelName::Arch6 => &[1024, 512],
            ModelName::Lstm64x2 => &[],
        }
    }

    pub fn is_recurrent(self) -> bool {
        self == ModelName::Lstm64x2
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "arch1" => Ok(ModelName::Arch1),
            "arch2" => Ok(ModelName::Arch2),
            "arch3" => Ok(ModelName::Arch3),
            "arch4" => Ok(ModelName::Arch4),
            "arch5" => Ok(ModelName::Arch5),
            "arch6" => Ok(ModelName::Arch6),
            "lstm64x2" => Ok(ModelName::Lstm64x2),
            other => Err(Error::config(format!("unknown architecture `{other}`"))),
        }
    }
}

/// How a model consumes a feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    /// Each frame is an independent `[dim, 1]` signal convolved across frequency.
    Frame,
    /// Frames form a `[time, dim]` sequence.
    Sequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: ModelName,
    pub input_dim: usize,
    pub input_mode: InputMode,
    pub layers: Vec<LayerKind>,
}

pub const LSTM_HIDDEN: usize = 64;
pub const DEFAULT_DROPOUT: f64 = 0.5;

impl ModelSpec {
    pub fn build(name: ModelName, input_dim: usize, dropout: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::config(format!("dropout rate {dropout} outside [0, 1)")));
        }
        if name.is_recurrent() {
            if input_dim == 0 {
                return Err(Error::config("input_dim must be positive"));
            }
            return Ok(Self {
                name,
                input_dim,
                input_mode: InputMode::Sequence,
                layers: vec![
                    LayerKind::Lstm { input: input_dim, hidden: LSTM_HIDDEN },
                    LayerKind::Lstm { input: LSTM_HIDDEN, hidden: LSTM_HIDDEN },
                    LayerKind::Dense { input: LSTM_HIDDEN, output: 2 },
                    LayerKind::Softmax,
                ],
            });
        }
        if ![64, 128, 256].contains(&input_dim) {
            return Err(Error::config(format!("CNN input_dim must be 64, 128 or 256, got {input_dim}")));
        }
        let mut layers = Vec::new();
        let (mut len, mut ch) = (input_dim, 1);
        let convs = name.conv_stack();
        for (i, &(kernel, filters)) in convs.iter().enumerate() {
            layers.push(LayerKind::Conv1d { kernel, in_ch: ch, out_ch: filters });
            ch = filters;
            let group_ends = convs.get(i + 1).map_or(true, |&(_, next)| next != filters);
            if group_ends {
                layers.push(LayerKind::MaxPool1d { size: 2 });
                len /= 2;
            }
        }
        layers.push(LayerKind::Flatten);
        let mut width = len * ch;
        for &hidden in name.dense_stack() {
            layers.push(LayerKind::Dense { input: width, output: hidden });
            layers.push(LayerKind::Relu);
            width = hidden;
        }
        layers.push(LayerKind::Dropout { rate: dropout });
        layers.push(LayerKind::Dense { input: width, output: 2 });
        layers.push(LayerKind::Softmax);
        Ok(Self { name, input_dim, input_mode: InputMode::Frame, layers })
    }

    /// Layer list as printed by `inspect` (the flatten step is implicit).
    pub fn summary(&self) -> Vec<String> {
        self.layers
            .iter()
            .filter(|k| !matches!(k, LayerKind::Flatten))
            .map(|k| k.to_string())
            .collect()
    }

    /// Width of the first dense layer's input for CNNs.
    pub fn dense_input_width(&self) -> Option<usize> {
        self.layers.iter().find_map(|k| match k {
            LayerKind::Dense { input, .. } => Some(*input),
            _ => None,
        })
    }
}

/// A model specification plus its float32 parameters.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub net: Network<f32>,
}

impl Model {
    pub fn new(spec: ModelSpec, seed: u64) -> Self {
        let mut net = Network::from_kinds(&spec.layers);
        net.init(&mut ChaCha8Rng::seed_from_u64(seed));
        // zero classifier head: the untrained posterior is uniform
        if let Some(Layer::Dense(head)) = net.layers.iter_mut().rev().find(|l| matches!(l, Layer::Dense(_))) {
            head.weight.iter_mut().for_each(|w| *w = 0.0);
        }
        Self { spec, net }
    }

    pub fn build(name: ModelName, input_dim: usize, seed: u64) -> Result<Self> {
        Ok(Self::new(ModelSpec::build(name, input_dim, DEFAULT_DROPOUT)?, seed))
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    /// Shapes a block of `rows` feature frames into the network input.
    pub fn input_tensor(&self, rows: &[f32], frames: usize) -> Result<Tensor<f32>> {
        let shape = match self.spec.input_mode {
            InputMode::Frame => vec![frames, self.spec.input_dim, 1],
            InputMode::Sequence => vec![1, frames, self.spec.input_dim],
        };
        Tensor::new(shape, rows.to_vec())
    }

    /// Frame posteriors `[frames x 2]` for one utterance's (normalized) features.
    pub fn posteriors(&mut self, features: &[f32], frames: usize) -> Result<Vec<f32>> {
        let dim = self.spec.input_dim;
        if features.len() != frames * dim {
            return Err(Error::shape(format!(
                "{} values for {frames} frames of dim {dim}",
                features.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match self.spec.input_mode {
            InputMode::Sequence => {
                let x = self.input_tensor(features, frames)?;
                Ok(self.net.forward(&x, false, &mut rng)?.into_data())
            }
            InputMode::Frame => {
                const CHUNK: usize = 256;
                let mut out = Vec::with_capacity(frames * 2);
                for chunk in features.chunks(CHUNK * dim) {
                    let x = self.input_tensor(chunk, chunk.len() / dim)?;
                    out.extend(self.net.forward(&x, false, &mut rng)?.into_data());
                }
                Ok(out)
            }
        }
    }
}
