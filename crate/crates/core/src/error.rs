use thiserror::Error;

/// Errors produced by the model, the samplers and the estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("alpha out of (1,2): got {0}")]
    AlphaOutOfRange(f64),
    #[error("p out of {range}: got {value}")]
    POutOfRange { value: f64, range: &'static str },
    #[error("invalid grain: {0}")]
    BadGrain(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),
    #[error("quadrature failed to reach tolerance {tolerance:e} (estimate {estimate:e}): {context}")]
    QuadratureFailure {
        context: String,
        tolerance: f64,
        estimate: f64,
    },
    #[error("z out of [-1,1]: got {0}")]
    ZOutOfRange(f64),
    #[error("grain budget exceeded: {count} > cap {cap}")]
    BudgetExceeded { count: u64, cap: u64 },
    #[error("truncation budget exceeded: {0}")]
    TruncationBudgetExceeded(String),
    #[error("covariance matrix is not positive semidefinite within jitter {jitter:e}")]
    CovarianceNotPsd { jitter: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate regression design: {0}")]
    DegenerateDesign(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
