use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A register or enumeration would exceed the supported size.
    #[error("capacity exceeded: {what} needs {requested}, limit is {limit}")]
    Capacity {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for the combinatorial / register-size failures that the
    /// benchmark tables report as "no solution found".
    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity { .. })
    }
}
