//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by validation, reconstruction, and i/o routines.
#[derive(Debug, Error)]
pub enum QdtError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max |M - M^dag| entry = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue = {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("trace must be {expected}, got {got}")]
    InvalidTrace { expected: f64, got: f64 },

    #[error("POVM elements must sum to the identity (deviation {deviation:.3e})")]
    IncompleteSum { deviation: f64 },

    #[error("probe set is informationally incomplete (rank {rank} < {needed})")]
    IncompleteDesign { rank: usize, needed: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, QdtError>;
