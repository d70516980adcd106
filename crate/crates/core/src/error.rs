use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed or schema-violating input. `at` names the field path or
    /// line/column where the problem was found.
    #[error("parse error at {at}: {message}")]
    Parse { at: String, message: String },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// A caller broke an operation's precondition. The input state is left
    /// untouched.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid planner config: {0}")]
    Config(String),

    #[error("weight file: {0}")]
    Weights(String),

    #[error("weight file checksum mismatch (expected {expected}, found {found})")]
    Checksum { expected: String, found: String },

    #[error("architecture mismatch in layer `{layer}`: {message}")]
    Architecture { layer: String, message: String },

    #[error("shape mismatch in layer `{layer}`: expected {expected}, got {actual}")]
    Shape {
        layer: String,
        expected: String,
        actual: String,
    },

    #[error("dataset: {0}")]
    Dataset(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn from_json(err: serde_path_to_error::Error<serde_json::Error>) -> Self {
        let path = err.path().to_string();
        let inner = err.into_inner();
        Error::Parse {
            at: format!("{path} (line {}, column {})", inner.line(), inner.column()),
            message: inner.to_string(),
        }
    }
}
