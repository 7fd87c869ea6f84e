//! Training and experiment orchestration.

mod baseline;
mod config;
mod data;
mod preset;
mod train;

pub use baseline::{utterance_log_energy, EnergyBaseline};
pub use config::TrainConfig;
pub use data::{extract_dataset, write_snr_audit, Dataset, NoiseSpec, SnrAudit, Utterance, FEATURE_CONFIG, FEATURE_INDEX};
pub use preset::{run_preset, ExperimentPreset, PresetOutcome};
pub use train::{evaluate, fit, EpochRecord, Evaluation, TrainingLog};
