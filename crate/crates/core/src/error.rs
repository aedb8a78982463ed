use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum FmmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("position ({x}, {y}) lies outside the domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("particle {index} at ({x}, {y}) lies outside the domain")]
    ParticleOutOfDomain { index: usize, x: f64, y: f64 },

    #[error("multipole and local centers coincide")]
    CoincidentCenters,

    #[error("expansion evaluated at its own center")]
    SingularEvaluation,

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error in key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FmmError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FmmError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FmmError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        FmmError::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, FmmError>;
