use thiserror::Error;

/// Errors raised by calibration, estimation, loading and experiment planning.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The classical mechanism is only valid for epsilon < 1.
    #[error("epsilon {epsilon} is outside the classical Gaussian mechanism range (0, 1)")]
    CgmRange { epsilon: f64 },

    #[error("root search did not converge within {iterations} iterations; bracket [{lo}, {hi}]")]
    Convergence { lo: f64, hi: f64, iterations: usize },

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("parse error at byte offset {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("bucket {bucket} (label {label}) needs {requested} records but only {available} are present")]
    Capacity {
        bucket: usize,
        label: u32,
        requested: usize,
        available: usize,
    },

    #[error("plan error: {0}")]
    Plan(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
