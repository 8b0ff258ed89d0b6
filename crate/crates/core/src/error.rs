use thiserror::Error;

/// Errors produced anywhere in the simulation, analysis, or I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// Squeezing pushed more than the allowed weight past the Fock cutoff.
    #[error("truncation error: leakage {leakage:.3e} exceeds {threshold:.1e}")]
    Truncation { leakage: f64, threshold: f64 },

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::InvalidInput(_) | Error::InvalidDimension(_) => 2,
            Error::Numeric(_) | Error::Truncation { .. } | Error::Io(_) => 3,
            Error::NoRoot(_) | Error::DegenerateVariance(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
