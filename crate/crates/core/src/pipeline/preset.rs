//! Named experiments covering the architecture, feature, quarter, baseline
//! and noise ablations.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::{Manifest, Split};
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::features::{FeatureConfig, FeatureKind, Quarter};
use crate::models::{save_checkpoint, ModelName};
use crate::pipeline::config::TrainConfig;
use crate::pipeline::data::{extract_dataset, write_snr_audit, NoiseSpec, SnrAudit};
use crate::pipeline::train::{evaluate, fit, TrainingLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: String,
    /// Results table the run corresponds to.
    pub table: String,
    pub feature: FeatureConfig,
    pub model: ModelName,
    pub snr_db: Option<f64>,
}

impl ExperimentPreset {
    fn new(name: String, table: &str, kind: FeatureKind, rate: u32, model: ModelName) -> Self {
        Self { name, table: table.into(), feature: FeatureConfig::new(kind, rate), model, snr_db: None }
    }

    pub fn all() -> Vec<Self> {
        let q1 = FeatureKind::Qse(Quarter::Q1);
        let mut out = Vec::new();
        for arch in ModelName::CNNS {
            for (rate, tag) in [(44_100, "44k"), (16_000, "16k")] {
                out.push(Self::new(format!("table2_{arch}_{tag}"), "2", q1, rate, arch));
            }
        }
        for arch in ModelName::CNNS {
            out.push(Self::new(format!("table4_mfcc_{arch}"), "4", FeatureKind::Mfcc, 16_000, arch));
        }
        for q in Quarter::QUARTERS {
            let kind = FeatureKind::Qse(q);
            out.push(Self::new(format!("table5_{}", q.as_str()), "5", kind, 16_000, ModelName::Arch4));
        }
        for (tag, kind) in [("lfbe", FeatureKind::Lfbe), ("mfcc", FeatureKind::Mfcc), ("qse", q1)] {
            out.push(Self::new(format!("table6_{tag}"), "6", kind, 16_000, ModelName::Lstm64x2));
        }
        for snr in [0.0, 5.0, 10.0] {
            let mut p = Self::new(format!("table7_snr{snr}"), "7", q1, 16_000, ModelName::Arch4);
            p.snr_db = Some(snr);
            out.push(p);
        }
        let half = FeatureKind::Qse(Quarter::Half);
        out.push(Self::new("half_envelope".into(), "half", half, 16_000, ModelName::Arch4));
        out
    }

    /// Case-insensitive lookup.
    pub fn by_name(name: &str) -> Result<Self> {
        let lower = name.to_ascii_lowercase();
        Self::all()
            .into_iter()
            .find(|p| p.name == lower)
            .ok_or_else(|| Error::config(format!("unknown preset `{name}`")))
    }
}

#[derive(Debug, Clone)]
pub struct PresetOutcome {
    pub report: EvalReport,
    pub log: TrainingLog,
    pub snr_audit: Vec<SnrAudit>,
}

#[derive(Serialize)]
struct RunConfig<'a> {
    preset: &'a ExperimentPreset,
    train: &'a TrainConfig,
}

/// Extracts, trains, evaluates on the test split, and writes `config.json`,
/// `train_log.csv`, `model.ckpt`, `report.csv`/`report.json` and, for noisy
/// presets, `snr_audit.csv` under `out_dir`.
pub fn run_preset(preset: &ExperimentPreset, manifest: &Manifest, out_dir: impl AsRef<Path>, cfg: &TrainConfig) -> Result<PresetOutcome> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let cfg_path = out_dir.join("config.json");
    let echo = serde_json::to_string_pretty(&RunConfig { preset, train: cfg })?;
    std::fs::write(&cfg_path, echo).map_err(|e| Error::io(&cfg_path, e))?;

    let noise = preset.snr_db.map(|snr_db| NoiseSpec { snr_db, seed: cfg.seed });
    let (data, snr_audit) = extract_dataset(manifest, &preset.feature, noise, None)?;
    if noise.is_some() {
        write_snr_audit(&snr_audit, out_dir.join("snr_audit.csv"))?;
    }
    let (mut ckpt, log) = fit(&data, preset.model, cfg)?;
    log.save(out_dir.join("train_log.csv"))?;
    save_checkpoint(&ckpt, out_dir.join("model.ckpt"))?;
    let report = evaluate(&mut ckpt, &data, Split::Test)?.report;
    report.save(out_dir.join("report.csv"))?;
    Ok(PresetOutcome { report, log, snr_audit })
}
