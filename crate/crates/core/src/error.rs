use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("inversion underflow: target {target:e} is below F({floor:e})")]
    Underflow { target: f64, floor: f64 },

    #[error("model construction failed: {0}")]
    Construction(String),

    #[error("source norm {norm} exceeds radius {radius}")]
    SourceViolation { norm: f64, radius: f64 },

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("truncation inadequate: {0}")]
    Truncation(String),

    #[error("packing failed: reached {achieved} of {target} codewords")]
    PackingFailure { achieved: usize, target: usize },

    #[error("amplitude too small: {0}")]
    Amplitude(String),

    #[error("rule mismatch: {0}")]
    RuleMismatch(String),

    #[error("invariant broken: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
