use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::audio::clip::{mean_power, AudioClip};
use crate::error::{Error, Result};

/// Adds seeded Gaussian white noise at `snr_db` relative to the power of the
/// whole clip. The result is not renormalized and may leave [-1, 1].
pub fn add_white_noise(clip: &AudioClip, snr_db: f64, seed: u64) -> Result<AudioClip> {
    if !snr_db.is_finite() {
        return Err(Error::config(format!("snr must be finite, got {snr_db}")));
    }
    let signal_power = clip.power();
    if signal_power <= 0.0 {
        return Err(Error::ZeroSignalPower);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..clip.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    // scale the realized draw, not the nominal variance, so the ratio is exact
    let raw_power = raw.iter().map(|v| v * v).sum::<f64>() / raw.len() as f64;
    let target = signal_power / 10f64.powf(snr_db / 10.0);
    let gain = (target / raw_power).sqrt();
    let samples = clip
        .samples
        .iter()
        .zip(&raw)
        .map(|(&s, &n)| (s as f64 + gain * n) as f32)
        .collect();
    Ok(AudioClip {
        samples,
        ..clip.clone()
    })
}

/// `10 log10(P_clean / P_(noisy - clean))`; `+inf` when the clips are identical.
pub fn measure_snr(clean: &AudioClip, noisy: &AudioClip) -> Result<f64> {
    if clean.len() != noisy.len() || clean.sample_rate != noisy.sample_rate {
        return Err(Error::shape(format!(
            "clean {} samples @ {} Hz vs noisy {} samples @ {} Hz",
            clean.len(),
            clean.sample_rate,
            noisy.len(),
            noisy.sample_rate
        )));
    }
    let diff: Vec<f32> = noisy
        .samples
        .iter()
        .zip(&clean.samples)
        .map(|(n, c)| n - c)
        .collect();
    let noise_power = mean_power(&diff);
    if noise_power == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (clean.power() / noise_power).log10())
}
