//! Checkpoint container: `QSE1` magic, u32 version, u32 header length, JSON
//! header, then little-endian f32 parameter blocks in layer order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, NormStats};
use crate::models::arch::{Model, ModelSpec};
use crate::nn::Network;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"QSE1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub feature: FeatureConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    meta: TrainingMeta,
    norm_stats: NormStats,
    param_blocks: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub norm_stats: NormStats,
    pub meta: TrainingMeta,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let blocks: Vec<&[f32]> = self.model.net.layers.iter().flat_map(|l| l.params()).collect();
        let header = Header {
            spec: self.model.spec.clone(),
            meta: self.meta.clone(),
            norm_stats: self.norm_stats.clone(),
            param_blocks: blocks.iter().map(|b| b.len()).collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(12 + json.len() + 4 * self.model.param_count());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for block in blocks {
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[0..4] != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("checkpoint version {version}, expected {CHECKPOINT_VERSION}")));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body_start = 12usize
            .checked_add(header_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| Error::Format("truncated checkpoint header".into()))?;
        let header: Header = serde_json::from_slice(&bytes[12..body_start])
            .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;

        let expected: Vec<usize> = header.spec.layers.iter().flat_map(|k| k.param_blocks()).collect();
        if expected != header.param_blocks {
            return Err(Error::Format(format!(
                "declared parameter blocks {:?} do not match the layer graph {:?}",
                header.param_blocks, expected
            )));
        }
        let total: usize = expected.iter().sum();
        let body = &bytes[body_start..];
        if body.len() != total * 4 {
            return Err(Error::Format(format!(
                "checkpoint holds {} parameter bytes, header declares {}",
                body.len(),
                total * 4
            )));
        }
        let flat: Vec<f32> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let mut net = Network::from_kinds(&header.spec.layers);
        net.load_flat_params(&flat)?;
        Ok(Self {
            model: Model { spec: header.spec, net },
            norm_stats: header.norm_stats,
            meta: header.meta,
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ckpt.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
