use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate {coord} lies outside the box beyond tolerance")]
    OutsideBox { coord: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step index must be at least 1")]
    ZeroStepIndex,

    #[error("step-size table exhausted at step {step} (table length {len})")]
    TableExhausted { step: u64, len: usize },

    #[error("non-finite value at step {step}: {what}")]
    NonFinite { step: u64, what: &'static str },

    #[error("evaluation time {t} is outside the recorded range")]
    OutOfRange { t: f64 },

    #[error("diagnostic window not covered by contiguous records: {0}")]
    WindowNotCovered(String),

    #[error("missing component: {0}")]
    Missing(&'static str),

    #[error("interval endpoints out of order: lo={lo}, hi={hi}")]
    BadInterval { lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
