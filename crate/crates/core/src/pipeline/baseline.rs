//! Loudness-only reference classifier: one threshold on mean frame log energy.

use crate::audio::{read_wav, AudioClip, Label, Manifest, Split};
use crate::error::{Error, Result};
use crate::eval::{compute_report, EvalReport};
use crate::features::{spectrogram, FeatureConfig, LOG_FLOOR};

/// Mean over frames of the natural-log frame power.
pub fn utterance_log_energy(clip: &AudioClip, feature: &FeatureConfig) -> Result<f64> {
    let clip = feature.conform(clip)?;
    let spec = spectrogram(&clip, &feature.framing)?;
    let total: f64 = spec
        .frame_iter()
        .map(|f| (f.iter().map(|m| m * m).sum::<f64>() + LOG_FLOOR).ln())
        .sum();
    Ok(total / spec.frames as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBaseline {
    pub threshold: f64,
    /// Whether energies above the threshold are called whispered.
    pub whisper_above: bool,
}

impl EnergyBaseline {
    /// Picks the threshold and polarity with the best training accuracy.
    pub fn fit(train: &[(f64, Label)]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Data("energy baseline needs training utterances".into()));
        }
        let mut values: Vec<f64> = train.iter().map(|p| p.0).collect();
        values.sort_by(f64::total_cmp);
        let mut candidates = vec![values[0] - 1.0];
        candidates.extend(values.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        let mut best = (0usize, Self { threshold: candidates[0], whisper_above: true });
        for &threshold in &candidates {
            for whisper_above in [true, false] {
                let model = Self { threshold, whisper_above };
                let hits = train.iter().filter(|&&(e, l)| model.predict(e) == l).count();
                if hits > best.0 {
                    best = (hits, model);
                }
            }
        }
        Ok(best.1)
    }

    pub fn predict(&self, energy: f64) -> Label {
        if (energy > self.threshold) == self.whisper_above {
            Label::Whisper
        } else {
            Label::Normal
        }
    }

    pub fn report(&self, test: &[(f64, Label)]) -> EvalReport {
        compute_report(test.iter().map(|&(e, l)| (l, self.predict(e))))
    }

    /// Fits on the manifest's train split and reports on its test split.
    pub fn run(manifest: &Manifest, feature: &FeatureConfig) -> Result<(Self, EvalReport)> {
        let energies = |split: Split| -> Result<Vec<(f64, Label)>> {
            manifest
                .split(split)
                .map(|e| Ok((utterance_log_energy(&read_wav(&e.path)?, feature)?, e.label)))
                .collect()
        };
        let baseline = Self::fit(&energies(Split::Train)?)?;
        let report = baseline.report(&energies(Split::Test)?);
        Ok((baseline, report))
    }
}
