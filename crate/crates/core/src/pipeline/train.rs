//! Frame-level training with utterance-level validation and early stopping,
//! and utterance-level evaluation of a checkpoint.

use std::path::Path;

use rand::seq::{index::sample, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{Label, Split};
use crate::error::{Error, Result};
use crate::eval::{compute_report, decide_flat, EvalReport, UtterancePosterior};
use crate::features::{apply_norm, fit_norm_stats, FeatureKind, FeatureMatrix};
use crate::models::{Checkpoint, InputMode, Model, ModelName, ModelSpec, TrainingMeta};
use crate::nn::{softmax_cross_entropy, Adam, AdamConfig, Tensor};
use crate::pipeline::config::TrainConfig;
use crate::pipeline::data::{Dataset, Utterance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Utterance-level validation accuracy in percent.
    pub val_acc: f64,
    /// Frame-level validation accuracy in percent; breaks ties between epochs.
    pub val_frame_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainingLog {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_acc\n");
        for r in &self.epochs {
            out.push_str(&format!("{},{:.6},{:.2}\n", r.epoch, r.train_loss, r.val_acc));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Log level of a feature row in dB, used by the optional silence filter.
fn frame_level_db(kind: FeatureKind, row: &[f32]) -> f64 {
    let mean = row.iter().map(|&v| v as f64).sum::<f64>() / row.len() as f64;
    match kind {
        // natural log of magnitude
        FeatureKind::Qse(_) => mean * 20.0 / std::f64::consts::LN_10,
        // orthonormal DCT: c0 = sqrt(M) * mean log power
        FeatureKind::Mfcc => row[0] as f64 / (row.len() as f64).sqrt() * 10.0 / std::f64::consts::LN_10,
        FeatureKind::Lfbe => mean * 10.0 / std::f64::consts::LN_10,
    }
}

/// Indices of frames within `filter_db` of the loudest frame (all frames when off).
fn kept_frames(fm: &FeatureMatrix, filter_db: Option<f64>) -> Vec<usize> {
    let Some(db) = filter_db else {
        return (0..fm.frames).collect();
    };
    let levels: Vec<f64> = fm.rows().map(|r| frame_level_db(fm.kind, r)).collect();
    let top = levels.iter().cloned().fold(f64::MIN, f64::max);
    (0..fm.frames).filter(|&n| levels[n] >= top - db).collect()
}

/// `count` indices spread evenly over `0..n`.
fn evenly_spaced(n: usize, count: usize) -> Vec<usize> {
    if count >= n {
        return (0..n).collect();
    }
    (0..count).map(|i| i * n / count).collect()
}

struct Prepared {
    label: Label,
    features: FeatureMatrix,
    frames: Vec<usize>,
}

fn gather(fm: &FeatureMatrix, frames: &[usize], out: &mut Vec<f32>) {
    for &n in frames {
        out.extend_from_slice(fm.row(n));
    }
}

/// Splits training utterance indices into (fit, validation), stratified by label.
fn stratified_split(train: &[&Utterance], fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let (mut fit, mut val) = (Vec::new(), Vec::new());
    for label in Label::ALL {
        let mut idx: Vec<usize> = (0..train.len()).filter(|&i| train[i].label == label).collect();
        idx.shuffle(rng);
        let n = idx.len();
        let n_val = if n < 2 { 0 } else { ((n as f64 * fraction).round() as usize).clamp(1, n - 1) };
        val.extend_from_slice(&idx[..n_val]);
        fit.extend_from_slice(&idx[n_val..]);
    }
    fit.sort_unstable();
    val.sort_unstable();
    (fit, val)
}

/// Trains `model_name` on the train split of `data`. Test utterances are never read.
pub fn fit(data: &Dataset, model_name: ModelName, cfg: &TrainConfig) -> Result<(Checkpoint, TrainingLog)> {
    cfg.validate()?;
    let dim = data.dim();
    let train: Vec<&Utterance> = data.split(Split::Train).collect();
    for label in Label::ALL {
        if !train.iter().any(|u| u.label == label) {
            return Err(Error::Data(format!("training split has no {label} utterances")));
        }
    }
    if let Some(u) = train.iter().find(|u| u.features.dim != dim || u.features.frames == 0) {
        return Err(Error::shape(format!(
            "utterance {} has {} frames of dim {}, expected dim {dim}",
            u.id, u.features.frames, u.features.dim
        )));
    }
    if !model_name.is_recurrent() && ![64, 128, 256].contains(&dim) {
        return Err(Error::shape(format!("{model_name} takes 64, 128 or 256 inputs, features have {dim}")));
    }
    let spec = ModelSpec::build(model_name, dim, cfg.dropout)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (fit_idx, val_idx) = stratified_split(&train, cfg.val_fraction, &mut rng);

    let norm = fit_norm_stats(fit_idx.iter().map(|&i| &train[i].features), "train")?;
    let prepare = |i: &usize| -> Result<Prepared> {
        let u = train[*i];
        let frames = kept_frames(&u.features, cfg.energy_filter_db);
        Ok(Prepared { label: u.label, features: apply_norm(&u.features, &norm)?, frames })
    };
    let fit_set: Vec<Prepared> = fit_idx.iter().map(prepare).collect::<Result<_>>()?;
    let val_set: Vec<Prepared> = val_idx.iter().map(prepare).collect::<Result<_>>()?;

    let mut model = Model::new(spec, rng_seed(cfg.seed, 1));
    let mut adam = Adam::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let mut epoch_rng = ChaCha8Rng::seed_from_u64(rng_seed(cfg.seed, 2));
    let mut epochs = Vec::new();
    let mut best: Option<(f64, f64, usize, Vec<f32>)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        let train_loss = match model.spec.input_mode {
            InputMode::Frame => frame_epoch(&mut model, &mut adam, &fit_set, cfg, &mut epoch_rng)?,
            InputMode::Sequence => sequence_epoch(&mut model, &mut adam, &fit_set, cfg, &mut epoch_rng)?,
        };
        let (val_acc, val_frame_acc) = validate(&mut model, &val_set, cfg)?;
        epochs.push(EpochRecord { epoch, train_loss, val_acc, val_frame_acc });
        log::debug!("epoch {epoch}: loss {train_loss:.4} val {val_acc:.2}% ({val_frame_acc:.2}% frames)");
        let improved = best.as_ref().map_or(true, |&(a, f, _, _)| (val_acc, val_frame_acc) > (a, f));
        if improved {
            best = Some((val_acc, val_frame_acc, epoch, model.net.flat_params()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let (best_acc, _, best_epoch, params) = best.expect("at least one epoch runs");
    model.net.load_flat_params(&params)?;
    let meta = TrainingMeta {
        seed: cfg.seed,
        epochs_run: epochs.len(),
        best_epoch,
        best_val_accuracy: best_acc,
        feature: data.feature,
    };
    Ok((Checkpoint { model, norm_stats: norm, meta }, TrainingLog { epochs, best_epoch }))
}

fn rng_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn step(model: &mut Model, adam: &mut Adam<f32>, x: Tensor<f32>, labels: &[usize], rng: &mut ChaCha8Rng) -> Result<f64> {
    model.net.zero_grad();
    let post = model.net.forward(&x, true, rng)?;
    let shape = post.shape().to_vec();
    let (loss, grad) = softmax_cross_entropy(post.data(), labels, 2)?;
    let softmax_at = model.net.layers.len() - 1;
    model.net.backward_from(softmax_at, Tensor::new(shape, grad)?)?;
    adam.step(model.net.grads_and_params());
    Ok(loss)
}

fn frame_epoch(
    model: &mut Model,
    adam: &mut Adam<f32>,
    set: &[Prepared],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut samples: Vec<(usize, usize)> = Vec::new();
    for (u, p) in set.iter().enumerate() {
        match cfg.frames_per_utterance {
            Some(cap) if cap < p.frames.len() => {
                samples.extend(sample(rng, p.frames.len(), cap).into_iter().map(|i| (u, p.frames[i])))
            }
            _ => samples.extend(p.frames.iter().map(|&n| (u, n))),
        }
    }
    samples.shuffle(rng);
    let dim = model.spec.input_dim;
    let (mut total, mut count) = (0.0, 0usize);
    for batch in samples.chunks(cfg.batch_size) {
        let mut x = Vec::with_capacity(batch.len() * dim);
        let mut labels = Vec::with_capacity(batch.len());
        for &(u, n) in batch {
            x.extend_from_slice(set[u].features.row(n));
            labels.push(set[u].label.index());
        }
        let loss = step(model, adam, Tensor::new(vec![batch.len(), dim, 1], x)?, &labels, rng)?;
        total += loss * batch.len() as f64;
        count += batch.len();
    }
    Ok(total / count as f64)
}

/// Recurrent models see random contiguous windows; `batch_size` counts frames.
fn sequence_epoch(
    model: &mut Model,
    adam: &mut Adam<f32>,
    set: &[Prepared],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let len = set.iter().map(|p| p.frames.len()).min().unwrap_or(0).min(cfg.seq_len);
    if len == 0 {
        return Err(Error::Data("a training utterance has no frames left after filtering".into()));
    }
    let mut windows: Vec<(usize, usize)> = Vec::new();
    for (u, p) in set.iter().enumerate() {
        let frames = cfg.frames_per_utterance.map_or(p.frames.len(), |c| c.min(p.frames.len()));
        for _ in 0..frames.div_ceil(len) {
            windows.push((u, rand::Rng::gen_range(rng, 0..=p.frames.len() - len)));
        }
    }
    windows.shuffle(rng);
    let dim = model.spec.input_dim;
    let per_batch = (cfg.batch_size / len).max(1);
    let (mut total, mut count) = (0.0, 0usize);
    for batch in windows.chunks(per_batch) {
        let mut x = Vec::with_capacity(batch.len() * len * dim);
        let mut labels = Vec::with_capacity(batch.len() * len);
        for &(u, start) in batch {
            gather(&set[u].features, &set[u].frames[start..start + len], &mut x);
            labels.extend(std::iter::repeat(set[u].label.index()).take(len));
        }
        let loss = step(model, adam, Tensor::new(vec![batch.len(), len, dim], x)?, &labels, rng)?;
        total += loss * labels.len() as f64;
        count += labels.len();
    }
    Ok(total / count as f64)
}

/// Utterance and frame accuracy (percent) on the validation utterances.
fn validate(model: &mut Model, set: &[Prepared], cfg: &TrainConfig) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Ok((0.0, 0.0));
    }
    let (mut correct, mut frames_correct, mut frames_total) = (0usize, 0usize, 0usize);
    for p in set {
        let n = p.frames.len();
        let chosen: Vec<usize> = match (cfg.val_frames_per_utterance, model.spec.input_mode) {
            (Some(cap), InputMode::Frame) => evenly_spaced(n, cap).into_iter().map(|i| p.frames[i]).collect(),
            (Some(cap), InputMode::Sequence) if cap < n => p.frames[(n - cap) / 2..(n - cap) / 2 + cap].to_vec(),
            _ => p.frames.clone(),
        };
        let mut x = Vec::with_capacity(chosen.len() * p.features.dim);
        gather(&p.features, &chosen, &mut x);
        let post = model.posteriors(&x, chosen.len())?;
        let truth = p.label.index();
        frames_correct += post.chunks_exact(2).filter(|r| (r[1] > r[0]) as usize == truth).count();
        frames_total += chosen.len();
        if decide_flat("val", &post)?.decision == p.label {
            correct += 1;
        }
    }
    Ok((
        100.0 * correct as f64 / set.len() as f64,
        100.0 * frames_correct as f64 / frames_total as f64,
    ))
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub utterances: Vec<UtterancePosterior>,
}

/// Scores every frame of each utterance in `split` and decides per utterance.
pub fn evaluate(ckpt: &mut Checkpoint, data: &Dataset, split: Split) -> Result<Evaluation> {
    let want = ckpt.meta.feature;
    if data.feature.kind != want.kind || data.dim() != ckpt.model.spec.input_dim {
        return Err(Error::shape(format!(
            "checkpoint expects {} features of dim {}, dataset holds {} of dim {}",
            want.kind,
            ckpt.model.spec.input_dim,
            data.feature.kind,
            data.dim()
        )));
    }
    let mut utterances = Vec::new();
    let mut pairs = Vec::new();
    for u in data.split(split) {
        let fm = apply_norm(&u.features, &ckpt.norm_stats)?;
        let post = ckpt.model.posteriors(&fm.values, fm.frames)?;
        let decided = decide_flat(&u.id, &post)?;
        pairs.push((u.label, decided.decision));
        utterances.push(decided);
    }
    if pairs.is_empty() {
        return Err(Error::Data(format!("no {split} utterances to evaluate")));
    }
    Ok(Evaluation { report: compute_report(pairs), utterances })
}
