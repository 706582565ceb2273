use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("pool has no liquidity")]
    EmptyPool,

    #[error("degenerate pool: ROI is undefined when a pool holds no liquidity (l1 = {l1})")]
    DegeneratePool { l1: f64 },

    #[error("indeterminate equilibrium: every liquidity split satisfies the equilibrium condition")]
    IndeterminateEquilibrium,

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },

    #[error("{path}:{line}: parse error: {reason}")]
    Parse {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("{path}:{line}: validation error: {reason}")]
    Validation {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("config error for key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
