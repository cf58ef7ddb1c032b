use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A point or scalar argument was not finite.
    #[error("invalid input: {0}")]
    Input(String),

    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An iterative procedure failed, usually because oracles are inconsistent.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A trace or series is too short for the requested window.
    #[error("range error: {0}")]
    Range(String),

    /// Values outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Missing or inconsistent experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A reported optimal value is above observed objective values.
    #[error("phi* inconsistency: observed gap {gap:e} at k = {k}")]
    PhiStarInconsistent { k: usize, gap: f64 },

    /// Malformed CSV input.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
