//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by prediction-space operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid label {label}: labels are 1..={n_classes}")]
    InvalidLabel { label: i64, n_classes: usize },

    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("degenerate geodesic: endpoints coincide on every sample")]
    DegenerateGeodesic,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Process exit code for the CLI: 2 for validation problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
