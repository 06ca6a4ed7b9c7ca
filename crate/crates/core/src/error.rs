use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape does not fit inside the container: {0}")]
    ShapeOutsideContainer(String),

    #[error("transformed support leaves the container")]
    Clipping,

    #[error("support is empty")]
    EmptySupport,

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("every candidate support collapsed to the empty set")]
    EmptySupportCollapse,

    #[error("root bracketing failed for order {order}: {reason}")]
    NonBracketing { order: f64, reason: String },

    #[error("numerical invariant violated: {0}")]
    Invariant(String),

    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
