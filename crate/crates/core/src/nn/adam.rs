use serde::{Deserialize, Serialize};

use crate::nn::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. Moment buffers are allocated lazily, one per
/// parameter block, in the order blocks are presented to `step`.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn step<'a, I>(&mut self, blocks: I)
    where
        I: IntoIterator<Item = (&'a mut [T], &'a [T])>,
    {
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let step = T::from_f64_lossy(c.lr * bc2.sqrt() / bc1);
        let (b1, b2) = (T::from_f64_lossy(c.beta1), T::from_f64_lossy(c.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let eps = T::from_f64_lossy(c.eps * bc2.sqrt());
        for (idx, (param, grad)) in blocks.into_iter().enumerate() {
            if idx == self.m.len() {
                self.m.push(vec![T::zero(); param.len()]);
                self.v.push(vec![T::zero(); param.len()]);
            }
            let (m, v) = (&mut self.m[idx], &mut self.v[idx]);
            assert_eq!(m.len(), param.len(), "parameter block {idx} changed size");
            for (((p, &g), mi), vi) in param.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + one_b1 * g;
                *vi = b2 * *vi + one_b2 * g * g;
                // equivalent to lr * m_hat / (sqrt(v_hat) + eps)
                *p -= step * *mi / (vi.sqrt() + eps);
            }
        }
    }
}
