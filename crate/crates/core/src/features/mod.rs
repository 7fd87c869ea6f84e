//! Short-time spectra and per-frame features (QSE, LFBE, MFCC).

mod fft;
mod io;
mod kind;
mod mel;
mod norm;
mod qse;
mod stft;

use serde::{Deserialize, Serialize};

pub use fft::{Complex, Fft};
pub use io::{decode_features, encode_features, read_features, write_features, FEATURE_MAGIC, FEATURE_VERSION};
pub use kind::{FeatureKind, FeatureMatrix, Quarter};
pub use mel::{dct2, dct2_matrix, hz_to_mel, lfbe, mel_filterbank, mel_to_hz, mfcc, MelFilterbank, DEFAULT_MELS};
pub use norm::{apply_norm, fit_norm_stats, NormStats, STD_FLOOR};
pub use qse::{qse, LOG_FLOOR, QSE_K};
pub use stft::{spectrogram, FramingConfig, Spectrogram, Window};

use crate::audio::{resample_44k_to_16k, AudioClip};
use crate::error::{Error, Result};

/// Everything needed to turn a clip into a feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub kind: FeatureKind,
    /// Rate the features are computed at; 44.1 kHz input is resampled down to 16 kHz when asked.
    pub sample_rate: u32,
    pub framing: FramingConfig,
    pub n_mels: usize,
}

impl FeatureConfig {
    pub fn new(kind: FeatureKind, sample_rate: u32) -> Self {
        Self {
            kind,
            sample_rate,
            framing: FramingConfig::default(),
            n_mels: DEFAULT_MELS,
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            FeatureKind::Qse(_) => self.kind.dim(),
            FeatureKind::Mfcc | FeatureKind::Lfbe => self.n_mels,
        }
    }

    /// Brings `clip` to the configured rate (only 44.1 kHz -> 16 kHz is supported).
    pub fn conform(&self, clip: &AudioClip) -> Result<AudioClip> {
        match (clip.sample_rate, self.sample_rate) {
            (a, b) if a == b => Ok(clip.clone()),
            (44_100, 16_000) => resample_44k_to_16k(clip),
            (a, _) => Err(Error::UnsupportedRate(a)),
        }
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureMatrix> {
        let clip = self.conform(clip)?;
        let spec = spectrogram(&clip, &self.framing)?;
        self.from_spectrogram(&spec)
    }

    pub fn from_spectrogram(&self, spec: &Spectrogram) -> Result<FeatureMatrix> {
        match self.kind {
            FeatureKind::Qse(q) => qse(spec, q),
            FeatureKind::Lfbe => lfbe(spec, self.n_mels),
            FeatureKind::Mfcc => mfcc(spec, self.n_mels, self.n_mels),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extract_resamples_and_sizes() {
        let clip = AudioClip::new((0..44_100).map(|i| (i as f32 * 0.1).sin() * 0.3).collect(), 44_100);
        let cfg = FeatureConfig::new(FeatureKind::Qse(Quarter::Q1), 16_000);
        let fm = cfg.extract(&clip).unwrap();
        assert_eq!(fm.dim, 128);
        assert_eq!(fm.frames, 1 + (16_000 - 1024) / 128);

        let up = FeatureConfig::new(FeatureKind::Mfcc, 44_100);
        let small = AudioClip::new(vec![0.1; 2048], 16_000);
        assert!(matches!(up.extract(&small), Err(Error::UnsupportedRate(16_000))));
        assert_eq!(FeatureConfig::new(FeatureKind::Lfbe, 16_000).extract(&small).unwrap().dim, 64);
    }
}
