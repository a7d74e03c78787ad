use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input outside the domain of a warping function.
    #[error("domain error: value {x} is outside the domain of the warp with gamma = {gamma}")]
    Domain { gamma: f64, x: f64 },

    #[error("skewness is undefined for samples with zero variance")]
    UndefinedSkewness,

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Graph too large for a dense or closed-form path.
    #[error("{0}")]
    Capacity(String),

    #[error("row {node} of the proximity matrix sums to zero")]
    ZeroRow { node: usize },

    #[error("graph has no nodes")]
    EmptyGraph,

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
