use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum DrrError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(String),

    #[error("row {row}, column {column}: cannot parse {value:?} as a finite number")]
    Parse {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "kernel system is singular (sigma={sigma}, gamma={gamma}); use a strictly positive ridge gamma"
    )]
    SingularKernel { sigma: f64, gamma: f64 },

    #[error("pooled covariance is singular; use a strictly positive LDA ridge")]
    SingularCovariance,

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("model file is corrupt: {0}")]
    Corrupt(String),

    #[error("unsupported model file version {found} (this build reads up to {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, DrrError>;

impl DrrError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DrrError::Io {
            path: path.into(),
            source,
        }
    }
}
