use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimizer and schedule settings for [`fit`](super::fit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub lr: f64,
    pub dropout: f64,
    /// Fraction of training utterances per class held out for early stopping.
    pub val_fraction: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Frames drawn (without replacement, reseeded each epoch) from every
    /// training utterance per epoch; `None` uses all frames.
    pub frames_per_utterance: Option<usize>,
    /// Evenly spaced frames scored per validation utterance; `None` scores all.
    pub val_frames_per_utterance: Option<usize>,
    /// Drop frames whose log energy sits more than this many dB below the
    /// utterance's loudest frame. Off by default.
    pub energy_filter_db: Option<f64>,
    /// Window length, in frames, of the sequences fed to recurrent models.
    pub seq_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            max_epochs: 50,
            lr: 1e-3,
            dropout: 0.5,
            val_fraction: 0.1,
            patience: 5,
            seed: 0,
            frames_per_utterance: None,
            val_frames_per_utterance: None,
            energy_filter_db: None,
            seq_len: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.val_fraction > 0.0 && self.val_fraction < 0.5) {
            return Err(Error::config(format!("val_fraction {} outside (0, 0.5)", self.val_fraction)));
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 || self.seq_len == 0 {
            return Err(Error::config("patience, batch_size, max_epochs and seq_len must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate {} must be positive", self.lr)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if matches!(self.frames_per_utterance, Some(0)) || matches!(self.val_frames_per_utterance, Some(0)) {
            return Err(Error::config("frame caps must be positive"));
        }
        if matches!(self.energy_filter_db, Some(db) if !(db > 0.0)) {
            return Err(Error::config("energy_filter_db must be positive"));
        }
        Ok(())
    }
}
