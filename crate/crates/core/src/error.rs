use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the market pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("agent {agent} lacks history: needs hours {needed_from}..{needed_to}, has {available_from}..{available_to}")]
    InsufficientHistory {
        agent: String,
        needed_from: i64,
        needed_to: i64,
        available_from: i64,
        available_to: i64,
    },

    #[error("dataset does not cover hours {needed_from}..{needed_to} contiguously (available run {available_from}..{available_to})")]
    InsufficientCoverage {
        needed_from: i64,
        needed_to: i64,
        available_from: i64,
        available_to: i64,
    },

    /// The coordinate-descent solver ran out of sweeps. Carries the last iterate.
    #[error("weighted lasso did not converge after {sweeps} sweeps (last max coefficient change {delta:e})")]
    NonConvergence {
        coefficients: Vec<f64>,
        delta: f64,
        sweeps: usize,
    },

    /// Buyer viability failed on a cleared market. This cannot happen for an
    /// exact minimizer, so it signals a solver defect.
    #[error("viability violated: market loss plus payments {lhs} exceeds baseline loss {rhs} by {gap:e}")]
    ViabilityViolation { lhs: f64, rhs: f64, gap: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
