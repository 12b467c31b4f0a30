use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("optimization failed: {message}")]
    Optimization {
        message: String,
        /// (argument, value) pairs visited by the coarse scan.
        scan: Vec<(f64, f64)>,
    },

    #[error("degenerate degrees of freedom: {0}")]
    DegreesOfFreedom(String),

    #[error("rank error: {0}")]
    Rank(String),

    #[error("unstable estimate: {0}")]
    Instability(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}
