use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("partition error: {0}")]
    Partition(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("selection error: {0}")]
    Selection(String),
    #[error("brute-force oracle too large: C({n},{k}) = {count} exceeds budget {budget}")]
    OracleTooLarge {
        n: usize,
        k: usize,
        count: u128,
        budget: u128,
    },
    #[error("unknown exemplar: {0}")]
    UnknownExemplar(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("normalization error: {0}")]
    Normalization(String),
    #[error("gateway error: {0}")]
    Gateway(String),
    #[error("no cassette entry for prompt {0}")]
    MissingCassetteEntry(String),
    #[error("runner error: {0}")]
    Runner(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
