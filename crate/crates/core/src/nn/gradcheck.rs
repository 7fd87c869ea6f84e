//! Central finite-difference gradient checks for individual layers.
//!
//! The probe loss is `L = sum(r * y)` for a fixed random `r`, so the upstream
//! gradient handed to `backward` is exactly `r`. Only the layer's forward pass
//! is used to form the numerical estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::network::Layer;
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_input_error: f64,
    pub max_param_error: f64,
    pub checked: usize,
}

impl GradCheck {
    pub fn max_error(&self) -> f64 {
        self.max_input_error.max(self.max_param_error)
    }
}

/// `|a - n| / max(|a|, |n|)`, treating pairs below `1e-7` in magnitude as exact.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-7 {
        return 0.0;
    }
    (analytic - numeric).abs() / scale
}

fn probe(layer: &mut Layer<f64>, x: &Tensor<f64>, r: &[f64], train_seed: Option<u64>) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(train_seed.unwrap_or(0));
    let y = layer.forward(x, train_seed.is_some(), &mut rng)?;
    Ok(y.data().iter().zip(r).map(|(a, b)| a * b).sum())
}

/// Compares analytic input and parameter gradients against central differences
/// with step `eps`. With `train_seed` set the layer runs in training mode with
/// an RNG reseeded identically for every evaluation (fixed dropout mask).
pub fn check_layer(
    layer: &mut Layer<f64>,
    x: &Tensor<f64>,
    eps: f64,
    seed: u64,
    train_seed: Option<u64>,
) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fwd_rng = ChaCha8Rng::seed_from_u64(train_seed.unwrap_or(0));
    let y = layer.forward(x, train_seed.is_some(), &mut fwd_rng)?;
    let r: Vec<f64> = (0..y.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for (_, g) in layer.params_and_grads() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let dx = layer.backward(&Tensor::new(y.shape().to_vec(), r.clone())?)?;
    let analytic_params: Vec<f64> = layer
        .params_and_grads()
        .into_iter()
        .flat_map(|(_, g)| g.to_vec())
        .collect();

    let mut report = GradCheck { max_input_error: 0.0, max_param_error: 0.0, checked: 0 };
    let mut xp = x.clone();
    for i in 0..x.len() {
        let orig = xp.data()[i];
        xp.data_mut()[i] = orig + eps;
        let plus = probe(layer, &xp, &r, train_seed)?;
        xp.data_mut()[i] = orig - eps;
        let minus = probe(layer, &xp, &r, train_seed)?;
        xp.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        report.max_input_error = report.max_input_error.max(relative_error(dx.data()[i], numeric));
        report.checked += 1;
    }

    let block_sizes: Vec<usize> = layer.params().iter().map(|p| p.len()).collect();
    let mut flat_index = 0;
    for (block, &size) in block_sizes.iter().enumerate() {
        for j in 0..size {
            let orig = layer.params_and_grads()[block].0[j];
            layer.params_and_grads()[block].0[j] = orig + eps;
            let plus = probe(layer, x, &r, train_seed)?;
            layer.params_and_grads()[block].0[j] = orig - eps;
            let minus = probe(layer, x, &r, train_seed)?;
            layer.params_and_grads()[block].0[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            report.max_param_error = report
                .max_param_error
                .max(relative_error(analytic_params[flat_index], numeric));
            flat_index += 1;
            report.checked += 1;
        }
    }
    Ok(report)
}

/// Uniform random tensor whose entries are at least `gap` apart in magnitude
/// from zero, keeping ReLU kinks out of reach of the difference step.
pub fn random_tensor(shape: Vec<usize>, rng: &mut impl Rng, gap: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f64 = rng.gen_range(gap..1.0);
            if rng.gen::<bool>() { v } else { -v }
        })
        .collect();
    Tensor::new(shape, data).expect("shape matches")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::Conv1d;
    use crate::nn::network::LayerKind;

    fn randomized(kind: LayerKind, rng: &mut ChaCha8Rng) -> Layer<f64> {
        let mut layer = Layer::from_kind(kind);
        layer.init(rng);
        // nonzero biases so their gradients are exercised off the origin
        for (p, _) in layer.params_and_grads() {
            for v in p.iter_mut() {
                *v += rng.gen_range(-0.1..0.1);
            }
        }
        layer
    }

    #[test]
    fn conv_linear_part() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kernel in [1, 3, 4, 5] {
            let mut conv = Conv1d::<f64>::new(kernel, 2, 3, false);
            for v in conv.weight.iter_mut().chain(conv.bias.iter_mut()) {
                *v = rng.gen_range(-1.0..1.0);
            }
            let mut layer = Layer::Conv1d(conv);
            let x = random_tensor(vec![2, 16, 2], &mut rng, 0.0);
            let report = check_layer(&mut layer, &x, 1e-3, 7, None).unwrap();
            assert!(report.max_error() < 1e-4, "kernel {kernel}: {report:?}");
        }
    }

    #[test]
    fn dense_and_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut dense = randomized(LayerKind::Dense { input: 5, output: 3 }, &mut rng);
        let x = random_tensor(vec![4, 5], &mut rng, 0.0);
        assert!(check_layer(&mut dense, &x, 1e-3, 1, None).unwrap().max_error() < 1e-4);

        let mut sm = Layer::from_kind(LayerKind::Softmax);
        let x = random_tensor(vec![3, 2], &mut rng, 0.0);
        assert!(check_layer(&mut sm, &x, 1e-3, 2, None).unwrap().max_error() < 1e-4);
    }

    #[test]
    fn relu_pool_dropout() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut relu = Layer::from_kind(LayerKind::Relu);
        let x = random_tensor(vec![2, 6], &mut rng, 0.01);
        assert!(check_layer(&mut relu, &x, 1e-3, 3, None).unwrap().max_error() < 1e-4);

        let mut pool = Layer::from_kind(LayerKind::MaxPool1d { size: 2 });
        let x = random_tensor(vec![2, 9, 2], &mut rng, 0.0);
        assert!(check_layer(&mut pool, &x, 1e-3, 4, None).unwrap().max_error() < 1e-4);

        let mut drop = Layer::from_kind(LayerKind::Dropout { rate: 0.5 });
        let x = random_tensor(vec![2, 8], &mut rng, 0.0);
        assert!(check_layer(&mut drop, &x, 1e-3, 5, Some(99)).unwrap().max_error() < 1e-4);
    }

    #[test]
    fn lstm_bptt() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut lstm = randomized(LayerKind::Lstm { input: 3, hidden: 4 }, &mut rng);
        let x = random_tensor(vec![2, 5, 3], &mut rng, 0.0);
        let report = check_layer(&mut lstm, &x, 1e-3, 6, None).unwrap();
        assert!(report.max_error() < 1e-3, "{report:?}");
    }
}
