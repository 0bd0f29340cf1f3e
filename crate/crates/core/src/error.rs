use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading inputs or running the matching pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate profile id `{0}`")]
    DuplicateProfile(String),

    #[error("profile `{id}` has embedding of length {found}, corpus dimension is {expected}")]
    EmbeddingLength {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown profile id `{0}`")]
    UnknownProfile(String),

    #[error("profile `{0}` appears in more than one coupled pair")]
    MultipleCouplings(String),

    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("timestamps are not sorted ascending")]
    Unsorted,

    #[error("not a probability distribution: {0}")]
    NotADistribution(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("feature layout mismatch: {0}")]
    Layout(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
