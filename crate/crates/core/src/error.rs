use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file: {0}")]
    Format(String),
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("unsupported sample rate {0} Hz")]
    UnsupportedRate(u32),
    #[error("clip has zero signal power")]
    ZeroSignalPower,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("manifest error at line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("clip of {len} samples is shorter than one frame ({frame})")]
    TooShort { len: usize, frame: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid label: {0}")]
    Label(String),
    #[error("posteriors not normalized: {0}")]
    Normalization(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by bad input data or files rather than by usage.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_))
    }
}
