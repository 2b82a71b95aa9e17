use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("diverged: {0}")]
    Diverged(String),

    #[error("undefined rate: {0} has a zero denominator")]
    UndefinedRate(&'static str),

    #[error("empty data: {0}")]
    Empty(String),

    #[error("unknown recording id `{0}`")]
    UnknownId(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("i/o error at {path}: {source}")]
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

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn empty(msg: impl Into<String>) -> Self {
        Error::Empty(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
