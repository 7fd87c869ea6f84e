//! Unidirectional LSTM over `[batch, time, features]` with exact BPTT.
//!
//! Gate blocks are packed in the order input, forget, candidate, output.

use crate::error::{Error, Result};
use crate::nn::scalar::{gemm, Mat, Scalar};
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Lstm<T> {
    pub input: usize,
    pub hidden: usize,
    /// `[input, 4 * hidden]`
    pub w_x: Vec<T>,
    /// `[hidden, 4 * hidden]`
    pub w_h: Vec<T>,
    pub bias: Vec<T>,
    pub grad_w_x: Vec<T>,
    pub grad_w_h: Vec<T>,
    pub grad_bias: Vec<T>,
    cache: Option<Cache<T>>,
}

#[derive(Debug, Clone)]
struct Cache<T> {
    batch: usize,
    steps: usize,
    x: Vec<T>,
    /// Post-activation gates per (t, b), `4 * hidden` wide.
    gates: Vec<T>,
    /// Cell state per (t, b).
    cell: Vec<T>,
    /// Hidden state per (t, b).
    h: Vec<T>,
}

fn sigmoid<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

impl<T: Scalar> Lstm<T> {
    pub fn new(input: usize, hidden: usize) -> Self {
        let g = 4 * hidden;
        Self {
            input,
            hidden,
            w_x: vec![T::zero(); input * g],
            w_h: vec![T::zero(); hidden * g],
            bias: vec![T::zero(); g],
            grad_w_x: vec![T::zero(); input * g],
            grad_w_h: vec![T::zero(); hidden * g],
            grad_bias: vec![T::zero(); g],
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.rank() != 3 || x.shape()[2] != self.input {
            return Err(Error::shape(format!(
                "LSTM expects [batch, time, {}], got {:?}",
                self.input,
                x.shape()
            )));
        }
        let (batch, steps) = (x.shape()[0], x.shape()[1]);
        if steps == 0 {
            return Err(Error::shape("LSTM needs at least one time step"));
        }
        let (hd, g4) = (self.hidden, 4 * self.hidden);
        // input projections for every (b, t) at once
        let mut proj = vec![T::zero(); batch * steps * g4];
        gemm(
            Mat::new(x.data(), batch * steps, self.input),
            Mat::new(&self.w_x, self.input, g4),
            T::zero(),
            &mut proj,
        );
        let mut gates = vec![T::zero(); steps * batch * g4];
        let mut cell = vec![T::zero(); steps * batch * hd];
        let mut h = vec![T::zero(); steps * batch * hd];
        let mut z = vec![T::zero(); batch * g4];
        for t in 0..steps {
            for b in 0..batch {
                let src = &proj[(b * steps + t) * g4..(b * steps + t + 1) * g4];
                for ((zv, &p), &bias) in z[b * g4..(b + 1) * g4].iter_mut().zip(src).zip(&self.bias) {
                    *zv = p + bias;
                }
            }
            if t > 0 {
                let prev = &h[(t - 1) * batch * hd..t * batch * hd];
                gemm(Mat::new(prev, batch, hd), Mat::new(&self.w_h, hd, g4), T::one(), &mut z);
            }
            for b in 0..batch {
                let zr = &z[b * g4..(b + 1) * g4];
                let gr = &mut gates[(t * batch + b) * g4..(t * batch + b + 1) * g4];
                for j in 0..hd {
                    gr[j] = sigmoid(zr[j]);
                    gr[hd + j] = sigmoid(zr[hd + j]);
                    gr[2 * hd + j] = zr[2 * hd + j].tanh();
                    gr[3 * hd + j] = sigmoid(zr[3 * hd + j]);
                }
                for j in 0..hd {
                    let c_prev = if t > 0 { cell[((t - 1) * batch + b) * hd + j] } else { T::zero() };
                    let c = gr[hd + j] * c_prev + gr[j] * gr[2 * hd + j];
                    cell[(t * batch + b) * hd + j] = c;
                    h[(t * batch + b) * hd + j] = gr[3 * hd + j] * c.tanh();
                }
            }
        }
        let mut out = vec![T::zero(); batch * steps * hd];
        for t in 0..steps {
            for b in 0..batch {
                out[(b * steps + t) * hd..(b * steps + t + 1) * hd]
                    .copy_from_slice(&h[(t * batch + b) * hd..(t * batch + b + 1) * hd]);
            }
        }
        self.cache = Some(Cache { batch, steps, x: x.data().to_vec(), gates, cell, h });
        Tensor::new(vec![batch, steps, hd], out)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::shape("LSTM backward called before forward"))?;
        let (batch, steps) = (cache.batch, cache.steps);
        let (hd, g4) = (self.hidden, 4 * self.hidden);
        if grad.shape() != [batch, steps, hd] {
            return Err(Error::shape(format!("LSTM gradient shape {:?}", grad.shape())));
        }
        let gd = grad.data();
        let mut dz_all = vec![T::zero(); batch * steps * g4];
        let mut dh_next = vec![T::zero(); batch * hd];
        let mut dc_next = vec![T::zero(); batch * hd];
        let mut dz = vec![T::zero(); batch * g4];
        for t in (0..steps).rev() {
            for b in 0..batch {
                let gr = &cache.gates[(t * batch + b) * g4..(t * batch + b + 1) * g4];
                let dzr = &mut dz[b * g4..(b + 1) * g4];
                for j in 0..hd {
                    let (i, f, g, o) = (gr[j], gr[hd + j], gr[2 * hd + j], gr[3 * hd + j]);
                    let c = cache.cell[(t * batch + b) * hd + j];
                    let c_prev = if t > 0 { cache.cell[((t - 1) * batch + b) * hd + j] } else { T::zero() };
                    let tc = c.tanh();
                    let dh = gd[(b * steps + t) * hd + j] + dh_next[b * hd + j];
                    let d_o = dh * tc;
                    let dc = dh * o * (T::one() - tc * tc) + dc_next[b * hd + j];
                    dzr[j] = dc * g * i * (T::one() - i);
                    dzr[hd + j] = dc * c_prev * f * (T::one() - f);
                    dzr[2 * hd + j] = dc * i * (T::one() - g * g);
                    dzr[3 * hd + j] = d_o * o * (T::one() - o);
                    dc_next[b * hd + j] = dc * f;
                }
                dz_all[(b * steps + t) * g4..(b * steps + t + 1) * g4].copy_from_slice(dzr);
            }
            if t > 0 {
                let prev = &cache.h[(t - 1) * batch * hd..t * batch * hd];
                gemm(Mat::new(prev, batch, hd).t(), Mat::new(&dz, batch, g4), T::one(), &mut self.grad_w_h);
                gemm(Mat::new(&dz, batch, g4), Mat::new(&self.w_h, hd, g4).t(), T::zero(), &mut dh_next);
            }
        }
        let rows = batch * steps;
        gemm(
            Mat::new(&cache.x, rows, self.input).t(),
            Mat::new(&dz_all, rows, g4),
            T::one(),
            &mut self.grad_w_x,
        );
        for row in dz_all.chunks_exact(g4) {
            for (gb, &v) in self.grad_bias.iter_mut().zip(row) {
                *gb += v;
            }
        }
        let mut dx = vec![T::zero(); rows * self.input];
        gemm(Mat::new(&dz_all, rows, g4), Mat::new(&self.w_x, self.input, g4).t(), T::zero(), &mut dx);
        Tensor::new(vec![batch, steps, self.input], dx)
    }
}
