use crate::error::{Error, Result};
use crate::nn::scalar::Scalar;

pub const PROB_FLOOR: f64 = 1e-12;

/// `-log p[label]` (floored) and its gradient with respect to the posteriors.
pub fn cross_entropy<T: Scalar>(posteriors: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if label >= posteriors.len() {
        return Err(Error::Label(format!(
            "label {label} out of range for {} classes",
            posteriors.len()
        )));
    }
    let floor = T::from_f64_lossy(PROB_FLOOR);
    let p = posteriors[label].max(floor);
    let mut grad = vec![T::zero(); posteriors.len()];
    grad[label] = -T::one() / p;
    Ok((-p.ln(), grad))
}

/// Mean cross-entropy over rows of softmax outputs, with the gradient taken
/// with respect to the pre-softmax logits (`(p - onehot) / rows`).
pub fn softmax_cross_entropy<T: Scalar>(posteriors: &[T], labels: &[usize], classes: usize) -> Result<(f64, Vec<T>)> {
    if posteriors.len() != labels.len() * classes {
        return Err(Error::shape(format!(
            "{} posteriors for {} labels x {classes} classes",
            posteriors.len(),
            labels.len()
        )));
    }
    let n = T::from_usize(labels.len().max(1)).unwrap();
    let mut total = 0.0;
    let mut grad = posteriors.to_vec();
    for (row, (p, &label)) in grad.chunks_exact_mut(classes).zip(posteriors.chunks_exact(classes).zip(labels)) {
        let (loss, _) = cross_entropy(p, label)?;
        total += loss.to_f64().unwrap();
        row[label] -= T::one();
        row.iter_mut().for_each(|v| *v = *v / n);
    }
    Ok((total / labels.len().max(1) as f64, grad))
}
