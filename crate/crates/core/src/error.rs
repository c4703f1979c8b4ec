use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no utterances")]
    NoUtterances,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("duplicate narrative for subject {subject_id} visit {visit_index}: {first} and {second}")]
    DuplicateNarrative {
        subject_id: String,
        visit_index: u32,
        first: PathBuf,
        second: PathBuf,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("narrative {0} has fewer than two utterances")]
    EmptyNarrative(String),

    #[error("cannot fill {splits} splits with {subjects} subjects")]
    TooFewSubjects { subjects: usize, splits: usize },

    #[error("zero-norm vector for text {0:?}")]
    ZeroNorm(String),

    #[error("zero-probability token at position {0}")]
    ZeroProbability(usize),

    #[error("backend {0} does not support conditional training")]
    Capability(String),

    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },

    #[error("model is untrained")]
    Untrained,

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("scoring failed for narrative {narrative}: {source}")]
    Scoring {
        narrative: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
