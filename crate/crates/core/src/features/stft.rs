use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::features::fft::Fft;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Hamming,
    Rect,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let phase = 2.0 * PI * i as f64 / n as f64;
                match self {
                    Window::Hann => 0.5 - 0.5 * phase.cos(),
                    Window::Hamming => 0.54 - 0.46 * phase.cos(),
                    Window::Rect => 1.0,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FramingConfig {
    pub frame_size: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub window: Window,
}

impl Default for FramingConfig {
    fn default() -> Self {
        Self::with_frame_size(1024)
    }
}

impl FramingConfig {
    /// Hop of one eighth of the frame, FFT the size of the frame, Hann window.
    pub fn with_frame_size(frame_size: usize) -> Self {
        Self {
            frame_size,
            hop: (frame_size / 8).max(1),
            fft_size: frame_size,
            window: Window::Hann,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.fft_size.is_power_of_two() {
            return Err(Error::config(format!("fft_size {} is not a power of two", self.fft_size)));
        }
        if self.frame_size == 0 || self.frame_size > self.fft_size {
            return Err(Error::config(format!(
                "frame_size {} must be in 1..=fft_size ({})",
                self.frame_size, self.fft_size
            )));
        }
        if self.hop == 0 {
            return Err(Error::config("hop must be at least 1"));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.frame_size {
            0
        } else {
            1 + (len - self.frame_size) / self.hop
        }
    }

    pub fn frame_duration_s(&self, sample_rate: u32) -> f64 {
        self.frame_size as f64 / sample_rate as f64
    }

    pub fn hop_duration_s(&self, sample_rate: u32) -> f64 {
        self.hop as f64 / sample_rate as f64
    }
}

/// Magnitude STFT, `frames x (fft_size/2 + 1)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Vec<f64>,
    pub frames: usize,
    pub sample_rate: u32,
    pub framing: FramingConfig,
}

impl Spectrogram {
    pub fn bins(&self) -> usize {
        self.framing.bins()
    }

    /// Half the FFT size; the highest bin index.
    pub fn k(&self) -> usize {
        self.framing.fft_size / 2
    }

    pub fn frame(&self, n: usize) -> &[f64] {
        let b = self.bins();
        &self.values[n * b..(n + 1) * b]
    }

    pub fn frame_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.bins())
    }
}

pub fn spectrogram(clip: &AudioClip, cfg: &FramingConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    let frames = cfg.frame_count(clip.len());
    if frames == 0 {
        return Err(Error::TooShort {
            len: clip.len(),
            frame: cfg.frame_size,
        });
    }
    let fft = Fft::new(cfg.fft_size);
    let window = cfg.window.coefficients(cfg.frame_size);
    let bins = cfg.bins();
    let mut values = Vec::with_capacity(frames * bins);
    let mut buf = vec![0f64; cfg.frame_size];
    for n in 0..frames {
        let start = n * cfg.hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = clip.samples[start + i] as f64 * window[i];
        }
        let spectrum = fft.forward_real(&buf);
        values.extend(spectrum[..bins].iter().map(|c| c.norm()));
    }
    Ok(Spectrogram {
        values,
        frames,
        sample_rate: clip.sample_rate,
        framing: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::fft::tests::direct_dft;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn on_bin_tone_rect() {
        let samples = (0..1024)
            .map(|n| (2.0 * PI * 64.0 * n as f64 / 1024.0).cos() as f32)
            .collect();
        let cfg = FramingConfig {
            window: Window::Rect,
            ..FramingConfig::default()
        };
        let spec = spectrogram(&AudioClip::new(samples, 16_000), &cfg).unwrap();
        assert_eq!(spec.frames, 1);
        assert_eq!(spec.bins(), 513);
        let frame = spec.frame(0);
        assert!((frame[64] - 512.0).abs() < 1e-3);
        for (k, &v) in frame.iter().enumerate() {
            if k != 64 {
                // f32 sample quantization bounds leakage; well under 1e-3 here
                assert!(v < 1e-3, "bin {k}: {v}");
            }
        }
    }

    #[test]
    fn on_bin_tone_exact_in_f64() {
        // the same tone without f32 storage hits the stated 1e-9 leakage bound
        let x: Vec<f64> = (0..1024)
            .map(|n| (2.0 * PI * 64.0 * n as f64 / 1024.0).cos())
            .collect();
        let spectrum = Fft::new(1024).forward_real(&x);
        assert!((spectrum[64].norm() - 512.0).abs() < 1e-9);
        for (k, c) in spectrum.iter().enumerate().take(513) {
            if k != 64 {
                assert!(c.norm() < 1e-9, "bin {k}");
            }
        }
    }

    #[test]
    fn zero_clip_frame_count() {
        let spec = spectrogram(&AudioClip::new(vec![0.0; 2048], 16_000), &FramingConfig::default()).unwrap();
        assert_eq!(spec.frames, 9);
        assert!(spec.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_short() {
        let err = spectrogram(&AudioClip::new(vec![0.0; 1023], 16_000), &FramingConfig::default()).unwrap_err();
        assert!(matches!(err, Error::TooShort { len: 1023, frame: 1024 }));
    }

    #[test]
    fn random_frame_matches_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<f32> = (0..1024).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cfg = FramingConfig::default();
        let spec = spectrogram(&AudioClip::new(samples.clone(), 16_000), &cfg).unwrap();
        let w = Window::Hann.coefficients(1024);
        let x: Vec<f64> = samples.iter().zip(&w).map(|(&s, &w)| s as f64 * w).collect();
        for (a, b) in spec.frame(0).iter().zip(direct_dft(&x)) {
            assert!((a - b.norm()).abs() < 1e-6);
        }
    }

    #[test]
    fn timing_at_16k() {
        let cfg = FramingConfig::default();
        assert_eq!(cfg.hop, 128);
        assert!((cfg.frame_duration_s(16_000) - 0.064).abs() < 1e-15);
        assert!((cfg.hop_duration_s(16_000) - 0.008).abs() < 1e-15);
    }

    #[test]
    fn invalid_framing() {
        let mut cfg = FramingConfig::default();
        cfg.fft_size = 1000;
        assert!(cfg.validate().is_err());
        cfg = FramingConfig::default();
        cfg.hop = 0;
        assert!(cfg.validate().is_err());
    }
}
