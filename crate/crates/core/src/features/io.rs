//! Binary feature-matrix files: `QSEF`, version, kind tag, frames, dim, f32 data.

use std::path::Path;

use crate::error::{Error, Result};
use crate::features::kind::{FeatureKind, FeatureMatrix};

pub const FEATURE_MAGIC: &[u8; 4] = b"QSEF";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 1 + 4 + 4;

pub fn encode_features(fm: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + fm.values.len() * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.push(fm.kind.tag());
    out.extend_from_slice(&(fm.frames as u32).to_le_bytes());
    out.extend_from_slice(&(fm.dim as u32).to_le_bytes());
    for v in &fm.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < HEADER_LEN || &bytes[0..4] != FEATURE_MAGIC {
        return Err(Error::Format("not a QSEF feature file".into()));
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != FEATURE_VERSION {
        return Err(Error::Format(format!("feature file version {version}, expected {FEATURE_VERSION}")));
    }
    let kind = FeatureKind::from_tag(bytes[8])?;
    let frames = u32_at(9) as usize;
    let dim = u32_at(13) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != frames * dim * 4 {
        return Err(Error::Format(format!(
            "feature body holds {} bytes, header declares {frames} x {dim}",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    FeatureMatrix::new(values, frames, dim, kind)
}

pub fn write_features(fm: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_features(fm)).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes)
}
