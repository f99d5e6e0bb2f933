use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the pipeline.
///
/// [`Error::category`] groups them into usage, input-format and numeric
/// failures so front ends can map them onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed WAV file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("unsupported codec in {path}: {codec}")]
    UnsupportedCodec { path: PathBuf, codec: String },

    #[error("truncated data chunk in {path}: expected {expected} samples, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("sample rate {found} Hz does not match the pipeline rate {expected} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("need at least {needed} frames, spectrogram has {available}")]
    InsufficientFrames { needed: usize, available: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("AUC undefined: {0}")]
    UndefinedAuc(String),

    #[error("attention rows are not stochastic: {0}")]
    Normalization(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("artifact {id} is corrupt: digest mismatch")]
    Corruption { id: String },

    #[error("unknown artifact kind `{0}`")]
    UnknownKind(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    InputFormat,
    Numeric,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::UnknownKind(_) => ErrorCategory::Usage,
            Error::Domain(_)
            | Error::DegenerateLabels(_)
            | Error::InsufficientData(_)
            | Error::UndefinedAuc(_)
            | Error::NonFinite(_) => ErrorCategory::Numeric,
            _ => ErrorCategory::InputFormat,
        }
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
