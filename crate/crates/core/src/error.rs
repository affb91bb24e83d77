use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no record lies within {radius} m of ({x}, {y})")]
    EmptyNeighborhood { x: f64, y: f64, radius: f64 },

    #[error("both fingerprints are empty; nothing to compare")]
    EmptyComparison,

    #[error("similarity is undefined for an empty observation")]
    UndefinedSimilarity,

    #[error("at least 2 points are required, got {0}")]
    InsufficientPoints(usize),

    #[error("length mismatch: {left} estimates vs {right} ground-truth locations")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("the reference fingerprint map has no reference points")]
    EmptyRfm,

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("{path}:{line}: {msg}")]
    Data {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
