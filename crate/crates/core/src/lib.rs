//! Whispered vs. normally phonated speech classification.
//!
//! The crate covers the full chain: PCM ingestion and noise injection,
//! short-time spectra and the quartered spectral envelope (QSE) with MFCC and
//! LFBE baselines, a small from-scratch neural engine (1D convolutions, LSTM,
//! Adam), the named model architectures, training, and utterance-level
//! evaluation. A synthetic source-filter corpus generator provides data with
//! known voiced/unvoiced structure.

pub mod audio;
pub mod error;

pub use error::{Error, Result};
pub mod features;
pub mod nn;
pub mod models;
pub mod eval;
pub mod synth;
pub mod pipeline;
pub mod cli;
