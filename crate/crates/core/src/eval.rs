//! Utterance-level decisions from frame posteriors, and classification metrics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::Label;
use crate::error::{Error, Result};

const ROW_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtterancePosterior {
    pub utterance_id: String,
    pub frame_posteriors: Vec<[f64; 2]>,
    pub mean_posterior: [f64; 2],
    pub decision: Label,
}

/// Averages frame posteriors and picks the larger mean; ties go to `Normal`.
pub fn decide_utterance(utterance_id: &str, frame_posteriors: &[[f64; 2]]) -> Result<UtterancePosterior> {
    if frame_posteriors.is_empty() {
        return Err(Error::shape("utterance has no frames"));
    }
    let mut sum = [0.0; 2];
    for (i, row) in frame_posteriors.iter().enumerate() {
        if (row[0] + row[1] - 1.0).abs() > ROW_TOLERANCE {
            return Err(Error::Normalization(format!(
                "frame {i} of `{utterance_id}` sums to {}",
                row[0] + row[1]
            )));
        }
        sum[0] += row[0];
        sum[1] += row[1];
    }
    let n = frame_posteriors.len() as f64;
    let mean = [sum[0] / n, sum[1] / n];
    let decision = if mean[1] > mean[0] { Label::Whisper } else { Label::Normal };
    Ok(UtterancePosterior {
        utterance_id: utterance_id.to_string(),
        frame_posteriors: frame_posteriors.to_vec(),
        mean_posterior: mean,
        decision,
    })
}

/// Convenience for a flat `[frames x 2]` f32 buffer.
pub fn decide_flat(utterance_id: &str, flat: &[f32]) -> Result<UtterancePosterior> {
    if flat.len() % 2 != 0 {
        return Err(Error::shape("posterior buffer is not two columns wide"));
    }
    let rows: Vec<[f64; 2]> = flat.chunks_exact(2).map(|r| [r[0] as f64, r[1] as f64]).collect();
    decide_utterance(utterance_id, &rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Rows are the truth, columns the decision, both ordered Normal, Whisper.
    pub confusion: [[usize; 2]; 2],
    pub normal: ClassMetrics,
    pub whisper: ClassMetrics,
    /// Percent.
    pub accuracy: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl EvalReport {
    pub fn from_confusion(confusion: [[usize; 2]; 2]) -> Self {
        let class = |c: usize| {
            let tp = confusion[c][c];
            let predicted = confusion[0][c] + confusion[1][c];
            let actual = confusion[c][0] + confusion[c][1];
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, actual);
            ClassMetrics { precision, recall, f1: f1_score(precision, recall) }
        };
        let total: usize = confusion.iter().flatten().sum();
        Self {
            confusion,
            normal: class(0),
            whisper: class(1),
            accuracy: 100.0 * ratio(confusion[0][0] + confusion[1][1], total),
        }
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn class(&self, label: Label) -> ClassMetrics {
        match label {
            Label::Normal => self.normal,
            Label::Whisper => self.whisper,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,precision,recall,f1\n");
        for label in Label::ALL {
            let m = self.class(label);
            out.push_str(&format!("{label},{:.4},{:.4},{:.4}\n", m.precision, m.recall, m.f1));
        }
        out.push_str(&format!("accuracy,{:.2}\n", self.accuracy));
        out
    }

    pub fn save(&self, csv_path: impl AsRef<Path>) -> Result<()> {
        let csv_path = csv_path.as_ref();
        std::fs::write(csv_path, self.to_csv()).map_err(|e| Error::io(csv_path, e))?;
        let json_path = csv_path.with_extension("json");
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))
    }
}

/// Builds a report from `(truth, decision)` pairs.
pub fn compute_report<I>(decisions: I) -> EvalReport
where
    I: IntoIterator<Item = (Label, Label)>,
{
    let mut confusion = [[0usize; 2]; 2];
    for (truth, decision) in decisions {
        confusion[truth.index()][decision.index()] += 1;
    }
    EvalReport::from_confusion(confusion)
}
