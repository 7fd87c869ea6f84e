use crate::error::{Error, Result};
use crate::features::kind::{FeatureKind, FeatureMatrix, Quarter};
use crate::features::stft::Spectrogram;

pub const LOG_FLOOR: f64 = 1e-10;

/// Required half FFT size; quarters are 128 bins wide.
pub const QSE_K: usize = 512;

/// Log-magnitude of one quarter (or the lower half) of each frame's spectrum.
pub fn qse(spec: &Spectrogram, quarter: Quarter) -> Result<FeatureMatrix> {
    if spec.k() != QSE_K {
        return Err(Error::shape(format!(
            "QSE needs K = {QSE_K} (1024-point FFT), spectrogram has K = {}",
            spec.k()
        )));
    }
    let range = quarter.bin_range(QSE_K);
    let dim = range.end() - range.start() + 1;
    let mut values = Vec::with_capacity(spec.frames * dim);
    for frame in spec.frame_iter() {
        values.extend(frame[range.clone()].iter().map(|&m| (m + LOG_FLOOR).ln() as f32));
    }
    FeatureMatrix::new(values, spec.frames, dim, FeatureKind::Qse(quarter))
}
