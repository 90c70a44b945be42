//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by series construction, model fitting and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// A price/return series violated a structural invariant.
    #[error("invalid series at index {index}: {reason}")]
    InvalidSeries { index: usize, reason: String },

    /// Two series that must share an aligned timestamp range do not.
    #[error("misaligned series: {0}")]
    Misaligned(String),

    /// A rolling window does not fit inside the series.
    #[error("window of {window} does not fit a series of length {len}")]
    WindowTooLong { window: usize, len: usize },

    /// Not enough observations for the requested operation.
    #[error("not enough data: need {need}, have {have} ({what})")]
    NotEnoughData {
        what: &'static str,
        need: usize,
        have: usize,
    },

    /// Input is degenerate for the requested estimator (constant series,
    /// single-class labels, all-hit likelihood, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Parameters violate a model constraint (e.g. covariance stationarity).
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// An optimizer stopped before reaching its convergence tolerance.
    /// Carries the best parameter vector and objective seen so far.
    #[error("optimizer did not converge after {iters} iterations (best objective {best_objective})")]
    NoConvergence {
        iters: usize,
        best_objective: f64,
        best_params: Vec<f64>,
    },

    /// A non-finite value appeared where it must not (NaN loss, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// File / format errors in CSV and JSON artifacts.
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
