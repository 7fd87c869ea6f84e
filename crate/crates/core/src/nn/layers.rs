//! Feed-forward layers with cached activations and exact backward passes.
//!
//! Frame-level tensors are laid out `[batch, length, channels]`; dense,
//! activation and softmax layers act on the last axis and treat all leading
//! axes as rows.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::scalar::{gemm, Mat, Scalar};
use crate::nn::tensor::Tensor;

fn expect_rank<T: Scalar>(x: &Tensor<T>, rank: usize, layer: &str) -> Result<()> {
    if x.rank() != rank {
        return Err(Error::shape(format!(
            "{layer} expects a rank-{rank} tensor, got shape {:?}",
            x.shape()
        )));
    }
    Ok(())
}

fn missing_cache(layer: &str) -> Error {
    Error::shape(format!("{layer} backward called before forward"))
}

/// "Same" 1D convolution (cross-correlation) over the length axis, with an
/// optional fused ReLU. Weights are stored `[kernel * in_ch, out_ch]`.
#[derive(Debug, Clone)]
pub struct Conv1d<T> {
    pub kernel: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub relu: bool,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub grad_weight: Vec<T>,
    pub grad_bias: Vec<T>,
    cols: Vec<T>,
    output: Vec<T>,
    input_shape: Vec<usize>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new(kernel: usize, in_ch: usize, out_ch: usize, relu: bool) -> Self {
        Self {
            kernel,
            in_ch,
            out_ch,
            relu,
            weight: vec![T::zero(); kernel * in_ch * out_ch],
            bias: vec![T::zero(); out_ch],
            grad_weight: vec![T::zero(); kernel * in_ch * out_ch],
            grad_bias: vec![T::zero(); out_ch],
            cols: Vec::new(),
            output: Vec::new(),
            input_shape: Vec::new(),
        }
    }

    /// Zero padding on the left; the right side gets `kernel - 1 - left`.
    pub fn pad_left(&self) -> usize {
        (self.kernel - 1) / 2
    }

    pub fn weight_at(&self, tap: usize, c_in: usize, c_out: usize) -> T {
        self.weight[(tap * self.in_ch + c_in) * self.out_ch + c_out]
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        expect_rank(x, 3, "Conv1d")?;
        let (batch, len, ch) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        if ch != self.in_ch {
            return Err(Error::shape(format!("Conv1d expects {} input channels, got {ch}", self.in_ch)));
        }
        if self.kernel > len {
            return Err(Error::shape(format!("kernel {} longer than input length {len}", self.kernel)));
        }
        let width = self.kernel * ch;
        let rows = batch * len;
        let pad = self.pad_left() as isize;
        let mut cols = vec![T::zero(); rows * width];
        let xd = x.data();
        for b in 0..batch {
            for l in 0..len {
                let row = &mut cols[(b * len + l) * width..(b * len + l + 1) * width];
                for j in 0..self.kernel {
                    let src = l as isize + j as isize - pad;
                    if src >= 0 && (src as usize) < len {
                        let from = (b * len + src as usize) * ch;
                        row[j * ch..(j + 1) * ch].copy_from_slice(&xd[from..from + ch]);
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(rows * self.out_ch);
        for _ in 0..rows {
            out.extend_from_slice(&self.bias);
        }
        gemm(
            Mat::new(&cols, rows, width),
            Mat::new(&self.weight, width, self.out_ch),
            T::one(),
            &mut out,
        );
        if self.relu {
            out.iter_mut().for_each(|v| *v = v.max(T::zero()));
        }
        self.cols = cols;
        self.output = out.clone();
        self.input_shape = x.shape().to_vec();
        Tensor::new(vec![batch, len, self.out_ch], out)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        if self.input_shape.is_empty() {
            return Err(missing_cache("Conv1d"));
        }
        let (batch, len, ch) = (self.input_shape[0], self.input_shape[1], self.input_shape[2]);
        let rows = batch * len;
        if grad.shape() != [batch, len, self.out_ch] {
            return Err(Error::shape(format!("Conv1d gradient shape {:?}", grad.shape())));
        }
        let mut g = grad.data().to_vec();
        if self.relu {
            for (gv, &o) in g.iter_mut().zip(&self.output) {
                if o <= T::zero() {
                    *gv = T::zero();
                }
            }
        }
        let width = self.kernel * ch;
        gemm(
            Mat::new(&self.cols, rows, width).t(),
            Mat::new(&g, rows, self.out_ch),
            T::one(),
            &mut self.grad_weight,
        );
        for row in g.chunks_exact(self.out_ch) {
            for (gb, &v) in self.grad_bias.iter_mut().zip(row) {
                *gb += v;
            }
        }
        let mut dcols = vec![T::zero(); rows * width];
        gemm(
            Mat::new(&g, rows, self.out_ch),
            Mat::new(&self.weight, width, self.out_ch).t(),
            T::zero(),
            &mut dcols,
        );
        let pad = self.pad_left() as isize;
        let mut dx = vec![T::zero(); batch * len * ch];
        for b in 0..batch {
            for l in 0..len {
                let row = &dcols[(b * len + l) * width..(b * len + l + 1) * width];
                for j in 0..self.kernel {
                    let dst = l as isize + j as isize - pad;
                    if dst >= 0 && (dst as usize) < len {
                        let to = (b * len + dst as usize) * ch;
                        for (d, &v) in dx[to..to + ch].iter_mut().zip(&row[j * ch..(j + 1) * ch]) {
                            *d += v;
                        }
                    }
                }
            }
        }
        Tensor::new(self.input_shape.clone(), dx)
    }
}

/// Non-overlapping max pooling over the length axis; a trailing partial window is dropped.
#[derive(Debug, Clone)]
pub struct MaxPool1d {
    pub size: usize,
    argmax: Vec<usize>,
    input_shape: Vec<usize>,
}

impl MaxPool1d {
    pub fn new(size: usize) -> Self {
        Self { size, argmax: Vec::new(), input_shape: Vec::new() }
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        expect_rank(x, 3, "MaxPool1d")?;
        let (batch, len, ch) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        if len < self.size {
            return Err(Error::shape(format!("pool size {} exceeds length {len}", self.size)));
        }
        let out_len = len / self.size;
        let xd = x.data();
        let mut out = Vec::with_capacity(batch * out_len * ch);
        let mut argmax = Vec::with_capacity(batch * out_len * ch);
        for b in 0..batch {
            for o in 0..out_len {
                for c in 0..ch {
                    let mut best = (b * len + o * self.size) * ch + c;
                    for i in 1..self.size {
                        let idx = (b * len + o * self.size + i) * ch + c;
                        // strict comparison keeps the earlier index on ties
                        if xd[idx] > xd[best] {
                            best = idx;
                        }
                    }
                    out.push(xd[best]);
                    argmax.push(best);
                }
            }
        }
        self.argmax = argmax;
        self.input_shape = x.shape().to_vec();
        Tensor::new(vec![batch, out_len, ch], out)
    }

    pub fn backward<T: Scalar>(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        if self.input_shape.is_empty() {
            return Err(missing_cache("MaxPool1d"));
        }
        if grad.len() != self.argmax.len() {
            return Err(Error::shape(format!("MaxPool1d gradient shape {:?}", grad.shape())));
        }
        let mut dx = Tensor::zeros(self.input_shape.clone());
        let d = dx.data_mut();
        for (&idx, &g) in self.argmax.iter().zip(grad.data()) {
            d[idx] += g;
        }
        Ok(dx)
    }
}

/// `[batch, length, channels]` -> `[batch, channels * length]`, channel-major.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    input_shape: Vec<usize>,
}

impl Flatten {
    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        expect_rank(x, 3, "Flatten")?;
        let (batch, len, ch) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let xd = x.data();
        let mut out = vec![T::zero(); batch * len * ch];
        for b in 0..batch {
            for l in 0..len {
                for c in 0..ch {
                    out[b * len * ch + c * len + l] = xd[(b * len + l) * ch + c];
                }
            }
        }
        self.input_shape = x.shape().to_vec();
        Tensor::new(vec![batch, len * ch], out)
    }

    pub fn backward<T: Scalar>(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        if self.input_shape.is_empty() {
            return Err(missing_cache("Flatten"));
        }
        let (batch, len, ch) = (self.input_shape[0], self.input_shape[1], self.input_shape[2]);
        if grad.len() != batch * len * ch {
            return Err(Error::shape(format!("Flatten gradient shape {:?}", grad.shape())));
        }
        let g = grad.data();
        let mut dx = vec![T::zero(); batch * len * ch];
        for b in 0..batch {
            for l in 0..len {
                for c in 0..ch {
                    dx[(b * len + l) * ch + c] = g[b * len * ch + c * len + l];
                }
            }
        }
        Tensor::new(self.input_shape.clone(), dx)
    }
}

/// Affine map on the last axis; weights stored `[input, output]`.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub input: usize,
    pub output: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub grad_weight: Vec<T>,
    pub grad_bias: Vec<T>,
    x: Vec<T>,
    input_shape: Vec<usize>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(input: usize, output: usize) -> Self {
        Self {
            input,
            output,
            weight: vec![T::zero(); input * output],
            bias: vec![T::zero(); output],
            grad_weight: vec![T::zero(); input * output],
            grad_bias: vec![T::zero(); output],
            x: Vec::new(),
            input_shape: Vec::new(),
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.last_dim() != self.input || x.rank() == 0 {
            return Err(Error::shape(format!(
                "Dense expects last axis {}, got shape {:?}",
                self.input,
                x.shape()
            )));
        }
        let rows = x.len() / self.input;
        let mut out = Vec::with_capacity(rows * self.output);
        for _ in 0..rows {
            out.extend_from_slice(&self.bias);
        }
        gemm(
            Mat::new(x.data(), rows, self.input),
            Mat::new(&self.weight, self.input, self.output),
            T::one(),
            &mut out,
        );
        self.x = x.data().to_vec();
        self.input_shape = x.shape().to_vec();
        let mut shape = x.shape().to_vec();
        *shape.last_mut().unwrap() = self.output;
        Tensor::new(shape, out)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        if self.input_shape.is_empty() {
            return Err(missing_cache("Dense"));
        }
        let rows = self.x.len() / self.input;
        if grad.len() != rows * self.output {
            return Err(Error::shape(format!("Dense gradient shape {:?}", grad.shape())));
        }
        gemm(
            Mat::new(&self.x, rows, self.input).t(),
            Mat::new(grad.data(), rows, self.output),
            T::one(),
            &mut self.grad_weight,
        );
        for row in grad.data().chunks_exact(self.output) {
            for (gb, &v) in self.grad_bias.iter_mut().zip(row) {
                *gb += v;
            }
        }
        let mut dx = vec![T::zero(); rows * self.input];
        gemm(
            Mat::new(grad.data(), rows, self.output),
            Mat::new(&self.weight, self.input, self.output).t(),
            T::zero(),
            &mut dx,
        );
        Tensor::new(self.input_shape.clone(), dx)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Vec<bool>,
}

impl Relu {
    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.mask = x.data().iter().map(|&v| v > T::zero()).collect();
        let data = x.data().iter().map(|&v| v.max(T::zero())).collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    pub fn backward<T: Scalar>(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        if grad.len() != self.mask.len() {
            return Err(missing_cache("Relu"));
        }
        let data = grad
            .data()
            .iter()
            .zip(&self.mask)
            .map(|(&g, &m)| if m { g } else { T::zero() })
            .collect();
        Tensor::new(grad.shape().to_vec(), data)
    }
}

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` during training.
#[derive(Debug, Clone)]
pub struct Dropout<T> {
    pub rate: f64,
    mask: Vec<T>,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(rate: f64) -> Self {
        Self { rate, mask: Vec::new() }
    }

    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, train: bool, rng: &mut R) -> Result<Tensor<T>> {
        if !train || self.rate == 0.0 {
            self.mask = vec![T::one(); x.len()];
            return Ok(x.clone());
        }
        let keep = T::from_f64_lossy(1.0 / (1.0 - self.rate));
        self.mask = (0..x.len())
            .map(|_| if rng.gen::<f64>() < self.rate { T::zero() } else { keep })
            .collect();
        let data = x.data().iter().zip(&self.mask).map(|(&v, &m)| v * m).collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        if grad.len() != self.mask.len() {
            return Err(missing_cache("Dropout"));
        }
        let data = grad.data().iter().zip(&self.mask).map(|(&g, &m)| g * m).collect();
        Tensor::new(grad.shape().to_vec(), data)
    }
}

/// Softmax over the last axis, stabilized by subtracting the row maximum.
#[derive(Debug, Clone, Default)]
pub struct Softmax<T> {
    output: Vec<T>,
    width: usize,
}

pub fn softmax_row<T: Scalar>(row: &mut [T]) {
    let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v = *v / total;
    }
}

impl<T: Scalar> Softmax<T> {
    pub fn new() -> Self {
        Self { output: Vec::new(), width: 0 }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let width = x.last_dim();
        let mut data = x.data().to_vec();
        for row in data.chunks_exact_mut(width) {
            softmax_row(row);
        }
        self.output = data.clone();
        self.width = width;
        Tensor::new(x.shape().to_vec(), data)
    }

    /// Jacobian-vector product: `dx = y * (g - <g, y>)` per row.
    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        if grad.len() != self.output.len() || self.width == 0 {
            return Err(missing_cache("Softmax"));
        }
        let mut dx = Vec::with_capacity(grad.len());
        for (g, y) in grad.data().chunks_exact(self.width).zip(self.output.chunks_exact(self.width)) {
            let dot: T = g.iter().zip(y).map(|(&a, &b)| a * b).sum();
            dx.extend(g.iter().zip(y).map(|(&a, &b)| b * (a - dot)));
        }
        Tensor::new(grad.shape().to_vec(), dx)
    }
}
