//! In-memory feature datasets: extraction from a manifest (with optional
//! noise injection and its SNR audit) and the on-disk feature directory.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{add_white_noise, measure_snr, read_wav, Label, Manifest, ManifestEntry, Split};
use crate::error::{Error, Result};
use crate::features::{read_features, write_features, FeatureConfig, FeatureMatrix};

pub const FEATURE_INDEX: &str = "index.csv";
pub const FEATURE_CONFIG: &str = "feature_config.json";

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub label: Label,
    pub split: Split,
    pub features: FeatureMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature: FeatureConfig,
    pub utterances: Vec<Utterance>,
}

/// White noise added at a fixed SNR before any resampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    /// Per-utterance seed, keyed by id so other entries never shift it.
    pub fn seed_for(&self, utterance_id: &str) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in utterance_id.bytes() {
            h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^ self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrAudit {
    pub utterance_id: String,
    pub split: Split,
    pub target_snr_db: f64,
    pub measured_snr_db: f64,
}

pub fn write_snr_audit(rows: &[SnrAudit], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.feature.dim()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Utterance> {
        self.utterances.iter().filter(move |u| u.split == split)
    }

    pub fn count(&self, label: Label, split: Split) -> usize {
        self.split(split).filter(|u| u.label == label).count()
    }

    /// Writes one `.qsef` file per utterance plus `index.csv` and the feature config.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let index_path = dir.join(FEATURE_INDEX);
        let mut w = csv::Writer::from_path(&index_path).map_err(|e| csv_err(&index_path, e))?;
        for u in &self.utterances {
            let file = format!("{}.qsef", u.id);
            write_features(&u.features, dir.join(&file))?;
            w.serialize(IndexRow { utterance_id: u.id.clone(), label: u.label, split: u.split, file })
                .map_err(|e| csv_err(&index_path, e))?;
        }
        w.flush().map_err(|e| Error::io(&index_path, e))?;
        let cfg_path = dir.join(FEATURE_CONFIG);
        std::fs::write(&cfg_path, serde_json::to_string_pretty(&self.feature)?).map_err(|e| Error::io(&cfg_path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let cfg_path = dir.join(FEATURE_CONFIG);
        let text = std::fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
        let feature: FeatureConfig = serde_json::from_str(&text)?;
        let index_path = dir.join(FEATURE_INDEX);
        let mut r = csv::Reader::from_path(&index_path).map_err(|e| csv_err(&index_path, e))?;
        let mut utterances = Vec::new();
        for row in r.deserialize() {
            let row: IndexRow = row.map_err(|e| csv_err(&index_path, e))?;
            let features = read_features(dir.join(&row.file))?;
            if features.kind != feature.kind || features.dim != feature.dim() {
                return Err(Error::shape(format!(
                    "{}: {} features of dim {}, directory declares {} of dim {}",
                    row.file,
                    features.kind,
                    features.dim,
                    feature.kind,
                    feature.dim()
                )));
            }
            utterances.push(Utterance { id: row.utterance_id, label: row.label, split: row.split, features });
        }
        Ok(Self { feature, utterances })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexRow {
    utterance_id: String,
    label: Label,
    split: Split,
    file: String,
}

/// Reads, optionally corrupts, conforms and featurizes every manifest entry.
/// `jobs` caps worker threads; `None` uses the global pool.
pub fn extract_dataset(
    manifest: &Manifest,
    feature: &FeatureConfig,
    noise: Option<NoiseSpec>,
    jobs: Option<usize>,
) -> Result<(Dataset, Vec<SnrAudit>)> {
    let work = |e: &ManifestEntry| -> Result<(Utterance, Option<SnrAudit>)> {
        let clean = read_wav(&e.path)?;
        let (clip, audit) = match noise {
            Some(n) => {
                let noisy = add_white_noise(&clean, n.snr_db, n.seed_for(&e.utterance_id))?;
                let measured = measure_snr(&clean, &noisy)?;
                let audit = SnrAudit {
                    utterance_id: e.utterance_id.clone(),
                    split: e.split,
                    target_snr_db: n.snr_db,
                    measured_snr_db: measured,
                };
                (noisy, Some(audit))
            }
            None => (clean, None),
        };
        let features = feature.extract(&clip)?;
        Ok((Utterance { id: e.utterance_id.clone(), label: e.label, split: e.split, features }, audit))
    };
    let run = || manifest.entries.par_iter().map(work).collect::<Result<Vec<_>>>();
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let mut utterances = Vec::with_capacity(results.len());
    let mut audit = Vec::new();
    for (u, a) in results {
        utterances.push(u);
        audit.extend(a);
    }
    Ok((Dataset { feature: *feature, utterances }, audit))
}

