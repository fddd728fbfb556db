use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the pipeline stages.
#[derive(Debug, Error)]
pub enum HarError {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("corrupt recording: {kept} rows kept, {dropped} dropped ({reason})")]
    CorruptRecording {
        kept: usize,
        dropped: usize,
        reason: String,
    },

    #[error("invalid column map: {0}")]
    InvalidColumnMap(String),

    #[error("sampling rate {rate:.3} Hz outside validity band [{low}, {high}]")]
    RateOutOfBand { rate: f64, low: f64, high: f64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("no overlap between accelerometer and gyroscope tracks")]
    NoOverlap,

    #[error("invalid feature manifest: {0}")]
    InvalidManifest(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("need at least two classes, found {0}")]
    SingleClass(usize),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("class order mismatch between models")]
    ClassOrderMismatch,

    #[error("leakage guard: validation row {row} reached {stage} in fold {fold}")]
    Leakage {
        stage: String,
        fold: usize,
        row: usize,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl HarError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarError>;
