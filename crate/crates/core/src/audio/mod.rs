//! Waveform ingestion, resampling, noise injection and corpus manifests.

mod clip;
mod manifest;
mod noise;
mod resample;
mod wav;

pub use clip::{AudioClip, Label};
pub use manifest::{load_manifest, parse_manifest, Manifest, ManifestEntry, Split, MANIFEST_HEADER};
pub use noise::{add_white_noise, measure_snr};
pub use resample::{output_len as resampled_len, resample_44k_to_16k};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav, SUPPORTED_RATES};
