//! Synthetic parallel corpus of voiced ("normal") and noise-excited
//! ("whisper") utterances built with a source-filter model.
//!
//! Every utterance is a short sequence of vowel-like phones. A phone is a
//! target tuple of three formants rendered by cascaded two-pole resonators.
//! Normal speech is excited by a band-limited impulse train at a slowly
//! drifting F0; whispered speech by white noise, with raised and widened
//! formants. Both excitations pass through the same glottal spectral tilt.
//! Utterance content (phones, timing, F0 contour) depends only on the seed
//! and index, so the two classes form parallel pairs.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::audio::{write_wav, AudioClip, Label, Manifest, ManifestEntry, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    /// F0 interval in Hz; equal endpoints force a constant pitch.
    pub f0_range: (f64, f64),
    /// Fractional rise of whisper formant centers.
    pub formant_shift: f64,
    /// Factor applied to whisper formant bandwidths.
    pub formant_bw_scale: f64,
    pub silence_pad_s: f64,
    /// Fraction of each class assigned to the test split.
    pub test_fraction: f64,
    /// Corner of the two-pole source tilt shared by both excitations, Hz.
    pub tilt_corner_hz: f64,
    /// RMS of the white recording noise under the whole clip, dB re full scale.
    pub noise_floor_dbfs: Option<f64>,
    pub utterances_per_speaker: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_per_class: 10,
            duration_s: 5.2,
            sample_rate: 16_000,
            f0_range: (100.0, 250.0),
            formant_shift: 0.15,
            formant_bw_scale: 2.0,
            silence_pad_s: 0.25,
            test_fraction: 0.2,
            tilt_corner_hz: 300.0,
            noise_floor_dbfs: Some(-80.0),
            utterances_per_speaker: 8,
            seed: 0,
        }
    }
}

const PHONES_PER_SPEAKER: usize = 6;
const FORMANT_RANGES: [(f64, f64); 3] = [(300.0, 900.0), (900.0, 2200.0), (2200.0, 3000.0)];
const BANDWIDTH_RANGES: [(f64, f64); 3] = [(60.0, 100.0), (80.0, 140.0), (100.0, 200.0)];
const TRANSITION_S: f64 = 0.02;
const PHONE_GAIN_RANGE_DB: f64 = 10.0;
const EDGE_RAMP_S: f64 = 0.03;
const PEAK: f64 = 0.5;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.f0_range;
        let nyq8 = self.sample_rate as f64 / 8.0;
        if !(lo > 50.0 && hi < nyq8 && lo <= hi) {
            return Err(Error::config(format!(
                "f0_range ({lo}, {hi}) must satisfy 50 < lo <= hi < {nyq8}"
            )));
        }
        if self.duration_s <= 2.0 * self.silence_pad_s || self.silence_pad_s < 0.0 {
            return Err(Error::config("duration must exceed twice the silence padding"));
        }
        if self.formant_bw_scale < 1.0 || self.formant_shift < 0.0 {
            return Err(Error::config("whisper formants may only move up and widen"));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::config("test_fraction must lie in [0, 1)"));
        }
        if self.sample_rate == 0 || self.n_per_class == 0 || self.utterances_per_speaker == 0 {
            return Err(Error::config("sample_rate, n_per_class and utterances_per_speaker must be positive"));
        }
        if matches!(self.noise_floor_dbfs, Some(db) if !(db < -20.0)) {
            return Err(Error::config("noise_floor_dbfs must lie below -20 dBFS"));
        }
        Ok(())
    }

    pub fn total_samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }

    pub fn n_test(&self) -> usize {
        (self.n_per_class as f64 * self.test_fraction).round() as usize
    }

    pub fn n_train(&self) -> usize {
        self.n_per_class - self.n_test()
    }

    pub fn split_of(&self, index: usize) -> Split {
        if index < self.n_train() {
            Split::Train
        } else {
            Split::Test
        }
    }

    /// Speaker of utterance `index`; train and test draw from disjoint pools.
    pub fn speaker_of(&self, index: usize) -> usize {
        let per = self.utterances_per_speaker;
        let (n_train, n_test) = (self.n_train(), self.n_test());
        let train_speakers = n_train.div_ceil(per).max(1);
        if index < n_train {
            index % train_speakers
        } else {
            let test_speakers = n_test.div_ceil(per).max(1);
            train_speakers + (index - n_train) % test_speakers
        }
    }
}

fn mix(seed: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_SPEAKER: u64 = 1;
const STREAM_CONTENT: u64 = 2;
const STREAM_WHISPER: u64 = 3;
const STREAM_FLOOR: u64 = 4;

#[derive(Debug, Clone, Copy)]
struct Formants {
    freq: [f64; 3],
    bw: [f64; 3],
}

#[derive(Debug, Clone)]
struct Speaker {
    phones: Vec<Formants>,
    f0_center: f64,
}

fn speaker(cfg: &SynthConfig, id: usize) -> Speaker {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, STREAM_SPEAKER, id as u64));
    let phones = (0..PHONES_PER_SPEAKER)
        .map(|_| {
            let mut freq = [0.0; 3];
            let mut bw = [0.0; 3];
            for j in 0..3 {
                freq[j] = rng.gen_range(FORMANT_RANGES[j].0..=FORMANT_RANGES[j].1);
                bw[j] = rng.gen_range(BANDWIDTH_RANGES[j].0..=BANDWIDTH_RANGES[j].1);
            }
            // keep formants ordered and at least 200 Hz apart
            freq[1] = freq[1].max(freq[0] + 200.0);
            freq[2] = freq[2].max(freq[1] + 200.0).min(3000.0);
            Formants { freq, bw }
        })
        .collect();
    let (lo, hi) = cfg.f0_range;
    Speaker { phones, f0_center: rng.gen_range(lo..=hi) }
}

/// Phone segmentation and prosody shared by the two renditions of an utterance.
#[derive(Debug, Clone)]
struct Content {
    /// `(start_sample, phone_index)` within the voiced region.
    segments: Vec<(usize, usize)>,
    /// Linear gain per segment, giving an intensity contour.
    gains: Vec<f64>,
    f0_depth: f64,
    f0_rate: f64,
    f0_phase: f64,
}

fn content(cfg: &SynthConfig, index: usize, voiced_len: usize) -> Content {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, STREAM_CONTENT, index as u64));
    let n_phones = rng.gen_range(3..=6);
    let weights: Vec<f64> = (0..n_phones).map(|_| rng.gen_range(0.6..1.4)).collect();
    let total: f64 = weights.iter().sum();
    let mut segments = Vec::with_capacity(n_phones);
    let mut acc = 0.0;
    let mut prev_phone = usize::MAX;
    for w in &weights {
        let mut phone = rng.gen_range(0..PHONES_PER_SPEAKER);
        if phone == prev_phone {
            phone = (phone + 1) % PHONES_PER_SPEAKER;
        }
        prev_phone = phone;
        segments.push(((acc / total * voiced_len as f64) as usize, phone));
        acc += w;
    }
    let gains = (0..n_phones).map(|_| 10f64.powf(rng.gen_range(-PHONE_GAIN_RANGE_DB..=0.0) / 20.0)).collect();
    Content {
        segments,
        gains,
        f0_depth: rng.gen_range(0.03..0.10),
        f0_rate: rng.gen_range(0.3..1.5),
        f0_phase: rng.gen_range(0.0..2.0 * PI),
    }
}

/// Per-sample formant track with linear transitions between phone targets.
fn formant_track(phones: &[Formants], segments: &[(usize, usize)], len: usize, rate: f64) -> Vec<Formants> {
    let ramp = (TRANSITION_S * rate) as usize;
    let mut track = Vec::with_capacity(len);
    for n in 0..len {
        let seg = segments.iter().rposition(|&(start, _)| start <= n).unwrap_or(0);
        let target = phones[segments[seg].1];
        let start = segments[seg].0;
        let f = if seg > 0 && n < start + ramp {
            let prev = phones[segments[seg - 1].1];
            let t = (n - start) as f64 / ramp as f64;
            let mut out = target;
            for j in 0..3 {
                out.freq[j] = prev.freq[j] + t * (target.freq[j] - prev.freq[j]);
                out.bw[j] = prev.bw[j] + t * (target.bw[j] - prev.bw[j]);
            }
            out
        } else {
            target
        };
        track.push(f);
    }
    track
}

/// Per-sample segment gain with the same linear transitions as the formants.
fn gain_track(cont: &Content, len: usize, rate: f64) -> Vec<f64> {
    let ramp = (TRANSITION_S * rate) as usize;
    (0..len)
        .map(|n| {
            let seg = cont.segments.iter().rposition(|&(start, _)| start <= n).unwrap_or(0);
            let start = cont.segments[seg].0;
            if seg > 0 && n < start + ramp {
                let t = (n - start) as f64 / ramp as f64;
                cont.gains[seg - 1] + t * (cont.gains[seg] - cont.gains[seg - 1])
            } else {
                cont.gains[seg]
            }
        })
        .collect()
}

/// Band-limited impulse train via the closed-form Dirichlet kernel.
fn impulse_train(f0: &[f64], rate: f64) -> Vec<f64> {
    let f0_max = f0.iter().cloned().fold(0.0, f64::max);
    let harmonics = ((0.45 * rate / f0_max).floor() as usize).max(1) as f64;
    let mut phase = 0.0f64;
    f0.iter()
        .map(|&f| {
            phase = (phase + 2.0 * PI * f / rate) % (2.0 * PI);
            let half = phase / 2.0;
            let s = half.sin();
            let sum = if s.abs() < 1e-9 {
                harmonics
            } else {
                ((harmonics + 0.5) * phase).sin() / (2.0 * s) - 0.5
            };
            sum / harmonics
        })
        .collect()
}

fn one_pole_lowpass(x: &mut [f64], corner_hz: f64, rate: f64) {
    let a = (-2.0 * PI * corner_hz / rate).exp();
    let mut y = 0.0;
    for v in x.iter_mut() {
        y = (1.0 - a) * *v + a * y;
        *v = y;
    }
}

/// Cascade of three two-pole resonators with unity DC gain, retuned every sample.
fn vocal_tract(x: &mut [f64], track: &[Formants], rate: f64) {
    let mut state = [[0.0f64; 2]; 3];
    for (v, f) in x.iter_mut().zip(track) {
        let mut s = *v;
        for j in 0..3 {
            let r = (-PI * f.bw[j] / rate).exp();
            let b = 2.0 * r * (2.0 * PI * f.freq[j] / rate).cos();
            let c = -r * r;
            let a = 1.0 - b - c;
            let y = a * s + b * state[j][0] + c * state[j][1];
            state[j][1] = state[j][0];
            state[j][0] = y;
            s = y;
        }
        *v = s;
    }
}

fn utterance_id(label: Label, index: usize) -> String {
    format!("{label}_{index:05}")
}

/// Renders utterance `index` of class `label`. Deterministic in `(cfg, label, index)`.
pub fn synth_utterance(cfg: &SynthConfig, label: Label, index: usize) -> Result<AudioClip> {
    cfg.validate()?;
    let rate = cfg.sample_rate as f64;
    let total = cfg.total_samples();
    let pad = (cfg.silence_pad_s * rate).round() as usize;
    let voiced_len = total - 2 * pad;
    let spk = speaker(cfg, cfg.speaker_of(index));
    let cont = content(cfg, index, voiced_len);

    let (lo, hi) = cfg.f0_range;
    let f0: Vec<f64> = (0..voiced_len)
        .map(|n| {
            let t = n as f64 / rate;
            let drift = 1.0 + cont.f0_depth * (2.0 * PI * cont.f0_rate * t + cont.f0_phase).sin();
            (spk.f0_center * drift).clamp(lo, hi)
        })
        .collect();

    let mut phones = spk.phones.clone();
    let mut signal = match label {
        Label::Normal => impulse_train(&f0, rate),
        Label::Whisper => {
            for p in &mut phones {
                for j in 0..3 {
                    p.freq[j] *= 1.0 + cfg.formant_shift;
                    p.bw[j] *= cfg.formant_bw_scale;
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, STREAM_WHISPER, index as u64));
            (0..voiced_len).map(|_| StandardNormal.sample(&mut rng)).collect()
        }
    };
    one_pole_lowpass(&mut signal, cfg.tilt_corner_hz, rate);
    one_pole_lowpass(&mut signal, cfg.tilt_corner_hz, rate);
    let track = formant_track(&phones, &cont.segments, voiced_len, rate);
    vocal_tract(&mut signal, &track, rate);

    let envelope = gain_track(&cont, voiced_len, rate);
    signal.iter_mut().zip(&envelope).for_each(|(v, g)| *v *= g);

    let ramp = ((EDGE_RAMP_S * rate) as usize).min(voiced_len / 2);
    for i in 0..ramp {
        let g = 0.5 - 0.5 * (PI * i as f64 / ramp as f64).cos();
        signal[i] *= g;
        signal[voiced_len - 1 - i] *= g;
    }
    let peak = signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = if peak > 0.0 { PEAK / peak } else { 0.0 };

    let mut samples = vec![0.0f64; total];
    for (dst, v) in samples[pad..pad + voiced_len].iter_mut().zip(&signal) {
        *dst = v * gain;
    }
    if let Some(db) = cfg.noise_floor_dbfs {
        let sigma = 10f64.powf(db / 20.0);
        let stream = STREAM_FLOOR + 16 * label.index() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, stream, index as u64));
        for v in samples.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * z;
        }
    }
    let samples: Vec<f32> = samples.into_iter().map(|v| v as f32).collect();
    Ok(AudioClip::new(samples, cfg.sample_rate)
        .with_id(utterance_id(label, index))
        .with_label(label))
}

/// Writes `2 * n_per_class` WAVs under `out_dir/wav`, plus `manifest.csv` and
/// `synth_config.json`.
pub fn generate_corpus(cfg: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    let wav_dir = out_dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;

    let jobs: Vec<(Label, usize)> = Label::ALL
        .iter()
        .flat_map(|&l| (0..cfg.n_per_class).map(move |i| (l, i)))
        .collect();
    use rayon::prelude::*;
    let entries: Vec<ManifestEntry> = jobs
        .par_iter()
        .map(|&(label, index)| -> Result<ManifestEntry> {
            let clip = synth_utterance(cfg, label, index)?;
            let path: PathBuf = wav_dir.join(format!("{}.wav", clip.utterance_id));
            write_wav(&clip, &path)?;
            Ok(ManifestEntry {
                utterance_id: clip.utterance_id,
                path,
                label,
                split: cfg.split_of(index),
            })
        })
        .collect::<Result<_>>()?;

    let manifest = Manifest { entries };
    manifest.save(out_dir.join("manifest.csv"))?;
    let cfg_path = out_dir.join("synth_config.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(cfg)?).map_err(|e| Error::io(&cfg_path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{load_manifest, read_wav};
    use crate::features::{spectrogram, FramingConfig};

    fn cfg() -> SynthConfig {
        SynthConfig { duration_s: 1.2, silence_pad_s: 0.1, ..SynthConfig::default() }
    }

    /// Fraction of 40 ms frames in the voiced region whose normalized
    /// autocorrelation peaks above 0.5 inside the F0 lag window.
    fn pitched_fraction(clip: &AudioClip, cfg: &SynthConfig) -> f64 {
        let rate = cfg.sample_rate as f64;
        let pad = (cfg.silence_pad_s * rate) as usize + (EDGE_RAMP_S * rate) as usize;
        let x = &clip.samples[pad..clip.samples.len() - pad];
        let frame = (0.04 * rate) as usize;
        let (lag_lo, lag_hi) = ((rate / cfg.f0_range.1) as usize, (rate / cfg.f0_range.0).ceil() as usize);
        let mut hits = 0;
        let mut total = 0;
        for chunk in x.chunks_exact(frame) {
            let c: Vec<f64> = chunk.iter().map(|&v| v as f64).collect();
            let r0: f64 = c.iter().map(|v| v * v).sum();
            let best = (lag_lo..=lag_hi.min(frame - 1))
                .map(|lag| {
                    let r: f64 = c[..frame - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum();
                    let e: f64 = c[lag..].iter().map(|v| v * v).sum();
                    r / (r0 * e).sqrt().max(1e-30)
                })
                .fold(f64::MIN, f64::max);
            total += 1;
            if best > 0.5 {
                hits += 1;
            }
        }
        hits as f64 / total as f64
    }

    fn mid_power_spectrum(clip: &AudioClip) -> Vec<f64> {
        let spec = spectrogram(clip, &FramingConfig::default()).unwrap();
        spec.frame(spec.frames / 2).iter().map(|m| m * m).collect()
    }

    #[test]
    fn duration_sets_sample_count() {
        let c = SynthConfig::default();
        let clip = synth_utterance(&c, Label::Normal, 0).unwrap();
        assert_eq!(clip.len(), 83_200);
        assert_eq!(clip.sample_rate, 16_000);
    }

    #[test]
    fn peak_and_silence_padding() {
        let c = cfg();
        for label in Label::ALL {
            let clip = synth_utterance(&c, label, 3).unwrap();
            let peak = clip.samples.iter().fold(0f32, |m, v| m.max(v.abs()));
            assert!((peak - 0.5).abs() < 1e-3, "{peak}");
            let pad = (c.silence_pad_s * 16_000.0) as usize;
            for edge in [&clip.samples[..pad], &clip.samples[clip.len() - pad..]] {
                let rms = (edge.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / pad as f64).sqrt();
                assert!((20.0 * rms.log10() + 80.0).abs() < 0.5, "{rms}");
            }
            let quiet = SynthConfig { noise_floor_dbfs: None, ..c.clone() };
            let clip = synth_utterance(&quiet, label, 3).unwrap();
            assert!(clip.samples[..pad].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn constant_f0_yields_harmonic_comb() {
        let c = SynthConfig { f0_range: (150.0, 150.0), ..cfg() };
        let p = mid_power_spectrum(&synth_utterance(&c, Label::Normal, 0).unwrap());
        let top = p[1..=128].iter().cloned().fold(0.0, f64::max);
        let peaks: Vec<usize> = (3..125)
            .filter(|&k| p[k] > top * 1e-4 && (k - 3..=k + 3).all(|j| j == k || p[j] < p[k]))
            .collect();
        assert!(peaks.len() >= 5, "{peaks:?}");
        let mut gaps: Vec<usize> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_unstable();
        let median = gaps[gaps.len() / 2] as f64;
        assert!((median - 9.6).abs() <= 1.0, "median gap {median}, peaks {peaks:?}");
    }

    fn flatness(p: &[f64]) -> f64 {
        let p = &p[1..];
        let geo = (p.iter().map(|v| (v + 1e-20).ln()).sum::<f64>() / p.len() as f64).exp();
        geo / (p.iter().sum::<f64>() / p.len() as f64)
    }

    #[test]
    fn whisper_spectrum_is_flatter() {
        let c = cfg();
        for i in 0..4 {
            let n = flatness(&mid_power_spectrum(&synth_utterance(&c, Label::Normal, i).unwrap()));
            let w = flatness(&mid_power_spectrum(&synth_utterance(&c, Label::Whisper, i).unwrap()));
            assert!(w > n, "utterance {i}: whisper {w} normal {n}");
        }
    }

    #[test]
    fn pitch_oracle_separates_classes() {
        let c = cfg();
        let n = 8;
        let normal = (0..n)
            .filter(|&i| pitched_fraction(&synth_utterance(&c, Label::Normal, i).unwrap(), &c) > 0.5)
            .count();
        let whisper = (0..n)
            .filter(|&i| pitched_fraction(&synth_utterance(&c, Label::Whisper, i).unwrap(), &c) <= 0.5)
            .count();
        assert!(normal as f64 / n as f64 >= 0.9, "normal pitched {normal}/{n}");
        assert!(whisper as f64 / n as f64 >= 0.9, "whisper unpitched {whisper}/{n}");
    }

    #[test]
    fn split_and_speakers_are_disjoint() {
        let c = cfg();
        assert_eq!((c.n_train(), c.n_test()), (8, 2));
        let train: Vec<usize> = (0..8).map(|i| c.speaker_of(i)).collect();
        let test: Vec<usize> = (8..10).map(|i| c.speaker_of(i)).collect();
        assert!(test.iter().all(|s| !train.contains(s)));
    }

    #[test]
    fn corpus_layout_and_determinism() {
        let c = cfg();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let m = generate_corpus(&c, a.path()).unwrap();
        generate_corpus(&c, b.path()).unwrap();
        for label in Label::ALL {
            assert_eq!(m.count(label, Split::Train), 8);
            assert_eq!(m.count(label, Split::Test), 2);
        }
        let loaded = load_manifest(a.path().join("manifest.csv")).unwrap();
        assert_eq!(loaded.entries.len(), 20);
        for e in &m.entries {
            let name = e.path.file_name().unwrap();
            let x = std::fs::read(a.path().join("wav").join(name)).unwrap();
            let y = std::fs::read(b.path().join("wav").join(name)).unwrap();
            assert_eq!(x, y, "{name:?}");
        }
        let clip = read_wav(&m.entries[0].path).unwrap();
        assert_eq!(clip.len(), c.total_samples());
        let sidecar: SynthConfig =
            serde_json::from_str(&std::fs::read_to_string(a.path().join("synth_config.json")).unwrap()).unwrap();
        assert_eq!(sidecar, c);
    }

    #[test]
    fn different_seeds_differ() {
        let a = synth_utterance(&cfg(), Label::Whisper, 0).unwrap();
        let b = synth_utterance(&SynthConfig { seed: 1, ..cfg() }, Label::Whisper, 0).unwrap();
        assert_ne!(a.samples, b.samples);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(SynthConfig { f0_range: (250.0, 100.0), ..cfg() }.validate().is_err());
        assert!(SynthConfig { duration_s: 0.1, ..cfg() }.validate().is_err());
        assert!(SynthConfig { formant_bw_scale: 0.5, ..cfg() }.validate().is_err());
    }
}
