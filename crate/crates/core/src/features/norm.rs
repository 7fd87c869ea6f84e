use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::kind::FeatureMatrix;

pub const STD_FLOOR: f64 = 1e-8;

/// Per-dimension standardization fitted on one split (normally `train`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
    pub fitted_on: String,
}

impl NormStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn normalize_row(&self, row: &mut [f32]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }
}

pub fn fit_norm_stats<'a, I>(features: I, fitted_on: &str) -> Result<NormStats>
where
    I: IntoIterator<Item = &'a FeatureMatrix>,
{
    let mut dim = None;
    let mut sum = Vec::new();
    let mut sum_sq = Vec::new();
    let mut count = 0usize;
    for fm in features {
        match dim {
            None => {
                dim = Some(fm.dim);
                sum = vec![0f64; fm.dim];
                sum_sq = vec![0f64; fm.dim];
            }
            Some(d) if d != fm.dim => {
                return Err(Error::shape(format!("feature dims {d} and {} mixed", fm.dim)))
            }
            _ => {}
        }
        for row in fm.rows() {
            for (j, &v) in row.iter().enumerate() {
                sum[j] += v as f64;
                sum_sq[j] += v as f64 * v as f64;
            }
        }
        count += fm.frames;
    }
    if count == 0 {
        return Err(Error::Data("cannot fit normalization on zero frames".into()));
    }
    let n = count as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| ((sq / n - m * m).max(0.0).sqrt().max(STD_FLOOR)) as f32)
        .collect();
    Ok(NormStats {
        mean: mean.into_iter().map(|m| m as f32).collect(),
        std,
        fitted_on: fitted_on.to_string(),
    })
}

pub fn apply_norm(fm: &FeatureMatrix, stats: &NormStats) -> Result<FeatureMatrix> {
    if fm.dim != stats.dim() {
        return Err(Error::shape(format!(
            "features have dim {}, stats {}",
            fm.dim,
            stats.dim()
        )));
    }
    let mut out = fm.clone();
    for row in out.values.chunks_exact_mut(fm.dim) {
        stats.normalize_row(row);
    }
    Ok(out)
}
