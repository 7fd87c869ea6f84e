//! Fixed-ratio 44.1 kHz -> 16 kHz polyphase windowed-sinc resampler.

use std::f64::consts::PI;

use crate::audio::clip::AudioClip;
use crate::error::{Error, Result};

const INPUT_RATE: u32 = 44_100;
const OUTPUT_RATE: u32 = 16_000;
/// Interpolation factor (output phases).
const UP: usize = 160;
/// Decimation factor.
const DOWN: usize = 441;
pub const TAPS_PER_PHASE: usize = 64;
pub const KAISER_BETA: f64 = 8.0;
pub const CUTOFF_HZ: f64 = 7_600.0;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser(pos: f64, half_width: f64, beta: f64) -> f64 {
    let r = pos / half_width;
    if r.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - r * r).sqrt()) / bessel_i0(beta)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Polyphase coefficient table: `UP` phases of `TAPS_PER_PHASE` taps each.
struct PolyphaseBank {
    taps: Vec<f32>,
}

impl PolyphaseBank {
    fn new() -> Self {
        let cutoff = CUTOFF_HZ / INPUT_RATE as f64;
        let half = TAPS_PER_PHASE as f64 / 2.0;
        let mut taps = vec![0f32; UP * TAPS_PER_PHASE];
        for phase in 0..UP {
            let frac = phase as f64 / UP as f64;
            let row = &mut taps[phase * TAPS_PER_PHASE..(phase + 1) * TAPS_PER_PHASE];
            let mut weights = [0f64; TAPS_PER_PHASE];
            for (j, w) in weights.iter_mut().enumerate() {
                // distance from the output instant to input sample `base - half + 1 + j`
                let offset = j as f64 - (half - 1.0) - frac;
                *w = 2.0 * cutoff * sinc(2.0 * cutoff * offset) * kaiser(offset, half, KAISER_BETA);
            }
            let gain: f64 = weights.iter().sum();
            for (dst, w) in row.iter_mut().zip(weights) {
                *dst = (w / gain) as f32;
            }
        }
        Self { taps }
    }

    fn phase(&self, p: usize) -> &[f32] {
        &self.taps[p * TAPS_PER_PHASE..(p + 1) * TAPS_PER_PHASE]
    }
}

pub fn output_len(input_len: usize) -> usize {
    input_len * UP / DOWN
}

/// Converts a 44.1 kHz clip to 16 kHz. Any other input rate is rejected,
/// so applying this twice fails on the second call.
pub fn resample_44k_to_16k(clip: &AudioClip) -> Result<AudioClip> {
    if clip.sample_rate != INPUT_RATE {
        return Err(Error::UnsupportedRate(clip.sample_rate));
    }
    let bank = PolyphaseBank::new();
    let x = &clip.samples;
    let n_out = output_len(x.len());
    let first_tap = TAPS_PER_PHASE as isize / 2 - 1;
    let mut out = Vec::with_capacity(n_out);
    for m in 0..n_out {
        let pos = m * DOWN;
        let base = (pos / UP) as isize;
        let taps = bank.phase(pos % UP);
        let start = base - first_tap;
        let mut acc = 0f32;
        if start >= 0 && (start as usize + TAPS_PER_PHASE) <= x.len() {
            let window = &x[start as usize..start as usize + TAPS_PER_PHASE];
            acc = window.iter().zip(taps).map(|(a, b)| a * b).sum();
        } else {
            for (j, &h) in taps.iter().enumerate() {
                let idx = start + j as isize;
                if idx >= 0 && (idx as usize) < x.len() {
                    acc += x[idx as usize] * h;
                }
            }
        }
        out.push(acc);
    }
    Ok(AudioClip {
        samples: out,
        sample_rate: OUTPUT_RATE,
        utterance_id: clip.utterance_id.clone(),
        label: clip.label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, n: usize) -> AudioClip {
        let samples = (0..n)
            .map(|i| (0.5 * (2.0 * PI * freq * i as f64 / rate as f64).sin()) as f32)
            .collect();
        AudioClip::new(samples, rate)
    }

    /// Direct DFT magnitude at one frequency over a Hann-windowed span.
    fn level_db(x: &[f32], rate: f64, freq: f64) -> f64 {
        let n = x.len();
        let (mut re, mut im) = (0.0, 0.0);
        for (i, &s) in x.iter().enumerate() {
            let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos();
            let ph = 2.0 * PI * freq * i as f64 / rate;
            re += w * s as f64 * ph.cos();
            im -= w * s as f64 * ph.sin();
        }
        20.0 * ((re * re + im * im).sqrt() / n as f64 + 1e-300).log10()
    }

    #[test]
    fn length_ratio() {
        let out = resample_44k_to_16k(&tone(440.0, 44_100, 44_100)).unwrap();
        assert_eq!(out.len(), 16_000);
        assert_eq!(out.sample_rate, 16_000);
        assert_eq!(output_len(1000), 362);
    }

    #[test]
    fn rejects_second_pass() {
        let out = resample_44k_to_16k(&tone(440.0, 44_100, 4410)).unwrap();
        assert!(matches!(resample_44k_to_16k(&out), Err(Error::UnsupportedRate(16_000))));
    }

    #[test]
    fn one_khz_peak_lands_on_bin_64() {
        let out = resample_44k_to_16k(&tone(1000.0, 44_100, 44_100)).unwrap();
        let frame = &out.samples[4000..5024];
        let mags: Vec<f64> = (0..=512)
            .map(|k| level_db(frame, 1024.0, k as f64))
            .collect();
        let peak = mags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, 64);
    }

    #[test]
    fn passband_and_stopband() {
        let span = 8000..12_000;
        let pass = resample_44k_to_16k(&tone(6000.0, 44_100, 44_100)).unwrap();
        let pass_db = level_db(&pass.samples[span.clone()], 16_000.0, 6000.0);
        let reference = level_db(&tone(6000.0, 16_000, 16_000).samples[span.clone()], 16_000.0, 6000.0);
        assert!((pass_db - reference).abs() < 1.0, "6 kHz: {pass_db} vs {reference}");

        let stop = resample_44k_to_16k(&tone(9000.0, 44_100, 44_100)).unwrap();
        // a 9 kHz input folds to 7 kHz at the 16 kHz output rate
        let alias_db = level_db(&stop.samples[span], 16_000.0, 7000.0);
        assert!(reference - alias_db >= 40.0, "9 kHz attenuation {}", reference - alias_db);
    }

    #[test]
    fn dc_gain_is_unity() {
        let out = resample_44k_to_16k(&AudioClip::new(vec![0.25; 4410], 44_100)).unwrap();
        for &s in &out.samples[100..out.len() - 100] {
            assert!((s - 0.25).abs() < 1e-5);
        }
    }
}
