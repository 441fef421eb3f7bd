use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by corpus handling, model code, and the evaluation
/// harness. Schema problems carry file/line context so operators can fix
/// exports without guesswork.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Schema {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("unknown node label id {0}")]
    UnknownLabel(u16),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("model: {0}")]
    Model(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("training aborted at epoch {epoch}, sample {sample}: loss is not finite")]
    NonFiniteLoss { epoch: usize, sample: usize },

    #[error("domain: {0}")]
    Domain(String),

    #[error("query {0} not found in its record file")]
    QueryNotFound(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
