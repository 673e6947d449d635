use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the captioning toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed WAV file: {0}")]
    Wav(String),

    #[error("unsupported audio encoding: {0}")]
    UnsupportedCodec(String),

    #[error("empty audio payload")]
    EmptyAudio,

    #[error("clip too short: {samples} samples, window needs {window}")]
    ClipTooShort { samples: usize, window: usize },

    #[error("tensor file: {0}")]
    TensorFormat(String),

    #[error("wrong length: expected {expected}, got {actual}")]
    WrongLength { expected: usize, actual: usize },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("score file: {0}")]
    Scores(String),

    #[error("empty caption after cleaning: {0:?}")]
    EmptyCaption(String),

    #[error("embedding file line {line}: {msg}")]
    Embedding { line: usize, msg: String },

    #[error("corpus too small: {0}")]
    CorpusTooSmall(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("training diverged: {0}")]
    NonFiniteLoss(String),

    #[error("{} {what} failed: {}", items.len(), items.join(", "))]
    Failed { what: &'static str, items: Vec<String> },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
