use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which slice of the positive-frequency bins a QSE feature keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quarter {
    Q1,
    Q2,
    Q3,
    Q4,
    Half,
}

impl Quarter {
    pub const QUARTERS: [Quarter; 4] = [Quarter::Q1, Quarter::Q2, Quarter::Q3, Quarter::Q4];

    /// Inclusive bin range for a half-spectrum of `k` bins (DC excluded).
    pub fn bin_range(self, k: usize) -> std::ops::RangeInclusive<usize> {
        let q = k / 4;
        match self {
            Quarter::Q1 => 1..=q,
            Quarter::Q2 => q + 1..=2 * q,
            Quarter::Q3 => 2 * q + 1..=3 * q,
            Quarter::Q4 => 3 * q + 1..=4 * q,
            Quarter::Half => 1..=2 * q,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quarter::Q1 => "q1",
            Quarter::Q2 => "q2",
            Quarter::Q3 => "q3",
            Quarter::Q4 => "q4",
            Quarter::Half => "half",
        }
    }
}

impl FromStr for Quarter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q1" => Ok(Quarter::Q1),
            "q2" => Ok(Quarter::Q2),
            "q3" => Ok(Quarter::Q3),
            "q4" => Ok(Quarter::Q4),
            "half" => Ok(Quarter::Half),
            other => Err(Error::config(format!("unknown quarter `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "quarter", rename_all = "lowercase")]
pub enum FeatureKind {
    Qse(Quarter),
    Mfcc,
    Lfbe,
}

impl FeatureKind {
    /// Feature dimension under the standard 1024-point framing and 64 mel bands.
    pub fn dim(self) -> usize {
        match self {
            FeatureKind::Qse(Quarter::Half) => 256,
            FeatureKind::Qse(_) => 128,
            FeatureKind::Mfcc | FeatureKind::Lfbe => 64,
        }
    }

    /// Tag byte used by the binary feature format.
    pub fn tag(self) -> u8 {
        match self {
            FeatureKind::Qse(Quarter::Q1) => 0,
            FeatureKind::Qse(Quarter::Q2) => 1,
            FeatureKind::Qse(Quarter::Q3) => 2,
            FeatureKind::Qse(Quarter::Q4) => 3,
            FeatureKind::Qse(Quarter::Half) => 4,
            FeatureKind::Mfcc => 5,
            FeatureKind::Lfbe => 6,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => FeatureKind::Qse(Quarter::Q1),
            1 => FeatureKind::Qse(Quarter::Q2),
            2 => FeatureKind::Qse(Quarter::Q3),
            3 => FeatureKind::Qse(Quarter::Q4),
            4 => FeatureKind::Qse(Quarter::Half),
            5 => FeatureKind::Mfcc,
            6 => FeatureKind::Lfbe,
            other => return Err(Error::Format(format!("unknown feature tag {other}"))),
        })
    }

    /// Parses a CLI pair such as (`qse`, `q3`) or (`mfcc`, ignored).
    pub fn parse(feature: &str, quarter: Option<&str>) -> Result<Self> {
        match feature.to_ascii_lowercase().as_str() {
            "qse" => Ok(FeatureKind::Qse(quarter.unwrap_or("q1").parse()?)),
            "mfcc" => Ok(FeatureKind::Mfcc),
            "lfbe" => Ok(FeatureKind::Lfbe),
            other => Err(Error::config(format!("unknown feature `{other}`"))),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::Qse(q) => write!(f, "qse-{}", q.as_str()),
            FeatureKind::Mfcc => f.write_str("mfcc"),
            FeatureKind::Lfbe => f.write_str("lfbe"),
        }
    }
}

/// Frames x dim feature values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Vec<f32>,
    pub frames: usize,
    pub dim: usize,
    pub kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn new(values: Vec<f32>, frames: usize, dim: usize, kind: FeatureKind) -> Result<Self> {
        if values.len() != frames * dim {
            return Err(Error::shape(format!(
                "{} values for {frames} x {dim} features",
                values.len()
            )));
        }
        Ok(Self {
            values,
            frames,
            dim,
            kind,
        })
    }

    pub fn row(&self, n: usize) -> &[f32] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.values.chunks_exact(self.dim)
    }
}
