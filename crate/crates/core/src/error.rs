use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invalid_parameter(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::NumericalDegeneracy(msg.into())
    }
}

/// Problems with a simulation configuration file or its flag overrides.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// `location` is `line N` for file entries or the flag name.
    #[error("{location}: key `{key}`: {message}")]
    Parse {
        key: String,
        location: String,
        message: String,
    },

    #[error("line {line}: malformed entry `{text}` (expected key=value)")]
    Syntax { line: usize, text: String },

    #[error("invalid configuration: {0}")]
    Validation(String),
}
