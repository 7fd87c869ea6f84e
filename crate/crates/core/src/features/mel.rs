//! Mel filterbank, log filterbank energies (LFBE) and MFCC.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::features::kind::{FeatureKind, FeatureMatrix};
use crate::features::qse::LOG_FLOOR;
use crate::features::stft::Spectrogram;

pub const DEFAULT_MELS: usize = 64;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Peak-normalized triangular filters, `n_mels x (fft_size/2 + 1)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub weights: Vec<f64>,
    pub n_mels: usize,
    pub bins: usize,
    /// Filter centers in Hz.
    pub centers: Vec<f64>,
}

impl MelFilterbank {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.bins..(m + 1) * self.bins]
    }

    /// `filterbank . values` for one frame.
    pub fn apply(&self, frame: &[f64]) -> Vec<f64> {
        (0..self.n_mels)
            .map(|m| self.row(m).iter().zip(frame).map(|(w, v)| w * v).sum())
            .collect()
    }
}

pub fn mel_filterbank(n_mels: usize, fft_size: usize, sample_rate: u32) -> Result<MelFilterbank> {
    if n_mels < 2 {
        return Err(Error::config(format!("need at least 2 mel bands, got {n_mels}")));
    }
    if !fft_size.is_power_of_two() || fft_size < 4 {
        return Err(Error::config(format!("fft_size {fft_size} is not a power of two >= 4")));
    }
    let bins = fft_size / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let mut weights = vec![0f64; n_mels * bins];
    for m in 0..n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = &mut weights[m * bins..(m + 1) * bins];
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let rise = (f - lo) / (center - lo);
            let fall = (hi - f) / (hi - center);
            *w = rise.min(fall).max(0.0);
        }
        let peak = row.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            return Err(Error::config(format!(
                "{n_mels} mel bands exceed the {bins} usable bins: band {m} ({lo:.1}-{hi:.1} Hz) covers no bin"
            )));
        }
        row.iter_mut().for_each(|w| *w /= peak);
    }
    Ok(MelFilterbank {
        weights,
        n_mels,
        bins,
        centers: edges[1..=n_mels].to_vec(),
    })
}

/// `log(filterbank . |X|^2 + floor)` per frame.
pub fn lfbe(spec: &Spectrogram, n_mels: usize) -> Result<FeatureMatrix> {
    let bank = mel_filterbank(n_mels, spec.framing.fft_size, spec.sample_rate)?;
    lfbe_with(spec, &bank)
}

pub fn lfbe_with(spec: &Spectrogram, bank: &MelFilterbank) -> Result<FeatureMatrix> {
    if bank.bins != spec.bins() {
        return Err(Error::shape(format!(
            "filterbank has {} bins, spectrogram {}",
            bank.bins,
            spec.bins()
        )));
    }
    let mut values = Vec::with_capacity(spec.frames * bank.n_mels);
    let mut power = vec![0f64; spec.bins()];
    for frame in spec.frame_iter() {
        for (p, &m) in power.iter_mut().zip(frame) {
            *p = m * m;
        }
        values.extend(bank.apply(&power).into_iter().map(|e| (e + LOG_FLOOR).ln() as f32));
    }
    FeatureMatrix::new(values, spec.frames, bank.n_mels, FeatureKind::Lfbe)
}

/// Orthonormal DCT-II basis, `n_coeffs x n` row-major.
pub fn dct2_matrix(n: usize, n_coeffs: usize) -> Vec<f64> {
    let mut basis = Vec::with_capacity(n * n_coeffs);
    for k in 0..n_coeffs {
        let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            basis.push(scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos());
        }
    }
    basis
}

pub fn dct2(input: &[f64], n_coeffs: usize) -> Vec<f64> {
    let n = input.len();
    let basis = dct2_matrix(n, n_coeffs);
    basis
        .chunks_exact(n)
        .map(|row| row.iter().zip(input).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn mfcc(spec: &Spectrogram, n_mels: usize, n_coeffs: usize) -> Result<FeatureMatrix> {
    if n_coeffs > n_mels {
        return Err(Error::config(format!(
            "{n_coeffs} cepstral coefficients requested from {n_mels} mel bands"
        )));
    }
    let energies = lfbe(spec, n_mels)?;
    let basis = dct2_matrix(n_mels, n_coeffs);
    let mut values = Vec::with_capacity(spec.frames * n_coeffs);
    for row in energies.rows() {
        for coeffs in basis.chunks_exact(n_mels) {
            let c: f64 = coeffs.iter().zip(row).map(|(a, &b)| a * b as f64).sum();
            values.push(c as f32);
        }
    }
    FeatureMatrix::new(values, spec.frames, n_coeffs, FeatureKind::Mfcc)
}
