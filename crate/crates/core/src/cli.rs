//! Command-line front end. Exit codes: 0 success, 1 usage or configuration
//! error, 2 data or format error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::builder::TypedValueParser;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::audio::{add_white_noise, load_manifest, measure_snr, read_wav, write_wav, Manifest, ManifestEntry};
use crate::features::{FeatureConfig, FeatureKind};
use crate::models::{count_flops_per_frame, count_macs_per_frame, load_checkpoint, save_checkpoint, ModelName, FLOP_CONVENTION};
use crate::pipeline::{evaluate, extract_dataset, fit, run_preset, write_snr_audit, Dataset, ExperimentPreset, NoiseSpec, SnrAudit, TrainConfig};
use crate::synth::{generate_corpus, SynthConfig};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const SEED_ENV: &str = "WHISPERLINE_SEED";

#[derive(Debug, Parser)]
#[command(name = "whisperline", version, about = "Whispered vs. normal speech classification toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic parallel corpus with a manifest
    Synth(SynthArgs),
    /// Compute features for every manifest entry
    Extract(ExtractArgs),
    /// Train a model on an extracted feature directory
    Train(TrainArgs),
    /// Score a checkpoint on the test split of a feature directory
    Eval(EvalArgs),
    /// Write noisy copies of a corpus at a fixed SNR
    Noise(NoiseArgs),
    /// Print a checkpoint's layers, parameter count and per-frame cost
    Inspect(InspectArgs),
    /// Run a named experiment end to end
    Preset(PresetArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Random seed
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Utterances per class
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Utterance length in seconds, silence padding included
    #[arg(long, default_value_t = 5.2)]
    pub duration: f64,
    /// Silence at each end of an utterance in seconds
    #[arg(long, default_value_t = 0.25)]
    pub pad: f64,
    /// Output sample rate in Hz
    #[arg(long, default_value_t = 16000)]
    pub rate: u32,
    /// Overwrite an existing output directory
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureArg {
    Qse,
    Mfcc,
    Lfbe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuarterArg {
    Q1,
    Q2,
    Q3,
    Q4,
    Half,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Manifest CSV
    #[arg(long)]
    pub manifest: PathBuf,
    /// Feature type
    #[arg(long, value_enum)]
    pub feature: FeatureArg,
    /// Spectral quarter for qse (ignored by mfcc and lfbe)
    #[arg(long, value_enum, default_value = "q1")]
    pub quarter: QuarterArg,
    /// Rate features are computed at; 44100 Hz audio may be resampled to 16000 Hz
    #[arg(long, default_value_t = 16000, value_parser = clap::builder::PossibleValuesParser::new(["16000", "44100"]).map(|s| s.parse::<u32>().unwrap()))]
    pub rate: u32,
    /// Output feature directory
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (defaults to all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Overwrite an existing output directory
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Arch1,
    Arch2,
    Arch3,
    Arch4,
    Arch5,
    Arch6,
    Lstm64x2,
}

impl From<ArchArg> for ModelName {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Arch1 => ModelName::Arch1,
            ArchArg::Arch2 => ModelName::Arch2,
            ArchArg::Arch3 => ModelName::Arch3,
            ArchArg::Arch4 => ModelName::Arch4,
            ArchArg::Arch5 => ModelName::Arch5,
            ArchArg::Arch6 => ModelName::Arch6,
            ArchArg::Lstm64x2 => ModelName::Lstm64x2,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainingFlags {
    #[command(flatten)]
    pub seed: SeedArg,
    /// Adam learning rate
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Frames per mini-batch
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    /// Maximum training epochs
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Dropout rate before the output layer
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    /// Epochs without validation improvement before stopping
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// Share of training utterances per class held out for validation
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    /// Frames sampled per training utterance each epoch (default: all)
    #[arg(long)]
    pub frames_per_utterance: Option<usize>,
    /// Frames scored per validation utterance (default: all)
    #[arg(long)]
    pub val_frames: Option<usize>,
    /// Skip frames more than this many dB below an utterance's loudest frame (default: off)
    #[arg(long)]
    pub energy_filter_db: Option<f64>,
    /// Window length in frames for recurrent models
    #[arg(long, default_value_t = 32)]
    pub seq_len: usize,
}

impl TrainingFlags {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch,
            max_epochs: self.epochs,
            lr: self.lr,
            dropout: self.dropout,
            val_fraction: self.val_fraction,
            patience: self.patience,
            seed: self.seed.seed,
            frames_per_utterance: self.frames_per_utterance,
            val_frames_per_utterance: self.val_frames,
            energy_filter_db: self.energy_filter_db,
            seq_len: self.seq_len,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature directory written by `extract`
    #[arg(long)]
    pub features: PathBuf,
    /// Model architecture
    #[arg(long, value_enum)]
    pub arch: ArchArg,
    /// Checkpoint path; the log and config are written alongside
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub training: TrainingFlags,
    /// Overwrite an existing checkpoint
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint to score
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Feature directory; its test split is scored
    #[arg(long)]
    pub features: PathBuf,
    /// Report CSV path; a JSON mirror is written next to it
    #[arg(long)]
    pub report: PathBuf,
    /// Overwrite an existing report
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Manifest CSV of the clean corpus
    #[arg(long)]
    pub manifest: PathBuf,
    /// Target signal-to-noise ratio in dB
    #[arg(long, allow_negative_numbers = true)]
    pub snr: f64,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Output directory for noisy WAVs, manifest and SNR audit
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite an existing output directory
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Checkpoint to describe
    #[arg(long)]
    pub ckpt: PathBuf,
}

#[derive(Debug, Args)]
pub struct PresetArgs {
    /// Preset name, e.g. table5_q1 or table7_snr0
    #[arg(long)]
    pub name: String,
    /// Manifest CSV
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for report, checkpoint, log and config
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub training: TrainingFlags,
    /// Overwrite an existing output directory
    #[arg(long)]
    pub force: bool,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(inner) if inner.is_data_error() => EXIT_DATA,
        Some(_) => EXIT_USAGE,
        None => match e.downcast_ref::<UsageError>() {
            Some(_) => EXIT_USAGE,
            None => EXIT_DATA,
        },
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Refuses to write over `path` unless forced.
fn guard(path: &Path, force: bool) -> Result<()> {
    let occupied = match std::fs::read_dir(path) {
        Ok(mut entries) => entries.next().is_some(),
        Err(_) => path.exists(),
    };
    if occupied && !force {
        return Err(usage(format!("{} already exists; pass --force to overwrite", path.display())));
    }
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn dispatch(command: Command) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match command {
        Command::Synth(a) => {
            let cfg = SynthConfig {
                n_per_class: a.n,
                duration_s: a.duration,
                silence_pad_s: a.pad,
                sample_rate: a.rate,
                seed: a.seed.seed,
                ..SynthConfig::default()
            };
            cfg.validate()?;
            guard(&a.out, a.force)?;
            let m = generate_corpus(&cfg, &a.out)?;
            writeln!(out, "wrote {} utterances to {}", m.entries.len(), a.out.display())?;
        }
        Command::Extract(a) => {
            let kind = FeatureKind::parse(feature_name(a.feature), Some(quarter_name(a.quarter)))?;
            let feature = FeatureConfig::new(kind, a.rate);
            if a.jobs == Some(0) {
                return Err(usage("--jobs must be at least 1"));
            }
            guard(&a.out, a.force)?;
            let manifest = load_manifest(&a.manifest)?;
            let (data, _) = extract_dataset(&manifest, &feature, None, a.jobs)?;
            data.save(&a.out)?;
            writeln!(out, "extracted {} utterances of {} (dim {})", data.utterances.len(), kind, data.dim())?;
        }
        Command::Train(a) => {
            let cfg = a.training.config();
            cfg.validate()?;
            guard(&a.out, a.force)?;
            let data = Dataset::load(&a.features)?;
            let (ckpt, log) = fit(&data, a.arch.into(), &cfg)?;
            save_checkpoint(&ckpt, &a.out)?;
            log.save(sibling(&a.out, ".log.csv"))?;
            let cfg_path = sibling(&a.out, ".config.json");
            std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg)?).with_context(|| cfg_path.display().to_string())?;
            writeln!(
                out,
                "trained {} for {} epochs; best epoch {} at {:.2}% validation accuracy",
                ckpt.model.spec.name, log.epochs.len(), log.best_epoch, log.best().val_acc
            )?;
        }
        Command::Eval(a) => {
            guard(&a.report, a.force)?;
            let mut ckpt = load_checkpoint(&a.ckpt)?;
            let data = Dataset::load(&a.features)?;
            let eval = evaluate(&mut ckpt, &data, crate::audio::Split::Test)?;
            eval.report.save(&a.report)?;
            write!(out, "{}", eval.report.to_csv())?;
        }
        Command::Noise(a) => {
            if !a.snr.is_finite() {
                return Err(usage("--snr must be finite"));
            }
            guard(&a.out, a.force)?;
            let audit = write_noisy_corpus(&a.manifest, a.snr, a.seed.seed, &a.out)?;
            let worst = audit.iter().map(|r| (r.measured_snr_db - r.target_snr_db).abs()).fold(0.0, f64::max);
            writeln!(out, "wrote {} noisy utterances; max SNR deviation {worst:.4} dB", audit.len())?;
        }
        Command::Inspect(a) => {
            let ckpt = load_checkpoint(&a.ckpt)?;
            let spec = &ckpt.model.spec;
            writeln!(out, "model: {}", spec.name)?;
            writeln!(out, "input: {} x {}", ckpt.meta.feature.kind, spec.input_dim)?;
            writeln!(out, "layers: {}", spec.summary().join(", "))?;
            writeln!(out, "params: {}", ckpt.model.param_count())?;
            writeln!(out, "macs/frame: {}", count_macs_per_frame(spec))?;
            writeln!(out, "flops/frame: {}", count_flops_per_frame(spec))?;
            writeln!(out, "convention: {FLOP_CONVENTION}")?;
            writeln!(
                out,
                "trained: seed {}, {} epochs, best epoch {} ({:.2}% validation)",
                ckpt.meta.seed, ckpt.meta.epochs_run, ckpt.meta.best_epoch, ckpt.meta.best_val_accuracy
            )?;
        }
        Command::Preset(a) => {
            let preset = ExperimentPreset::by_name(&a.name)?;
            let cfg = a.training.config();
            cfg.validate()?;
            guard(&a.out, a.force)?;
            let manifest = load_manifest(&a.manifest)?;
            let outcome = run_preset(&preset, &manifest, &a.out, &cfg)?;
            write!(out, "{}", outcome.report.to_csv())?;
        }
    }
    Ok(())
}

fn feature_name(f: FeatureArg) -> &'static str {
    match f {
        FeatureArg::Qse => "qse",
        FeatureArg::Mfcc => "mfcc",
        FeatureArg::Lfbe => "lfbe",
    }
}

fn quarter_name(q: QuarterArg) -> &'static str {
    match q {
        QuarterArg::Q1 => "q1",
        QuarterArg::Q2 => "q2",
        QuarterArg::Q3 => "q3",
        QuarterArg::Q4 => "q4",
        QuarterArg::Half => "half",
    }
}

/// Noisy WAVs at the source rate, a matching manifest and `snr_audit.csv`.
fn write_noisy_corpus(manifest: &Path, snr_db: f64, seed: u64, out_dir: &Path) -> Result<Vec<SnrAudit>> {
    let manifest = load_manifest(manifest)?;
    let wav_dir = out_dir.join("wav");
    std::fs::create_dir_all(&wav_dir).with_context(|| wav_dir.display().to_string())?;
    let noise = NoiseSpec { snr_db, seed };
    let mut entries = Vec::with_capacity(manifest.entries.len());
    let mut audit = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let clean = read_wav(&e.path)?;
        let noisy = add_white_noise(&clean, snr_db, noise.seed_for(&e.utterance_id))?;
        audit.push(SnrAudit {
            utterance_id: e.utterance_id.clone(),
            split: e.split,
            target_snr_db: snr_db,
            measured_snr_db: measure_snr(&clean, &noisy)?,
        });
        let path = wav_dir.join(format!("{}.wav", e.utterance_id));
        write_wav(&noisy, &path)?;
        entries.push(ManifestEntry { path, ..e.clone() });
    }
    Manifest { entries }.save(out_dir.join("manifest.csv"))?;
    write_snr_audit(&audit, out_dir.join("snr_audit.csv"))?;
    Ok(audit)
}
