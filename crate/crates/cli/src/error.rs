use std::fmt;

use grainfield::Error;

/// Exit codes: 0 success, 1 failed verification or I/O, 2 invalid input,
/// 3 sampling budget, 4 quadrature, 5 regime mismatch.
#[derive(Debug)]
pub enum CliError {
    Model(Error),
    Config(String),
    Io(std::io::Error),
    VerifyFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) | CliError::VerifyFailed(_) => 1,
            CliError::Model(e) => match e {
                Error::AlphaOutOfRange(_)
                | Error::POutOfRange { .. }
                | Error::BadGrain(_)
                | Error::InvalidArgument(_)
                | Error::ZOutOfRange(_)
                | Error::GridMismatch(_)
                | Error::Unsupported(_) => 2,
                Error::BudgetExceeded { .. } | Error::TruncationBudgetExceeded(_) => 3,
                Error::QuadratureFailure { .. } => 4,
                Error::RegimeMismatch(_) => 5,
                Error::CovarianceNotPsd { .. } | Error::InsufficientData(_) | Error::DegenerateDesign(_) => 1,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::VerifyFailed(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct_per_class() {
        assert_eq!(CliError::from(Error::AlphaOutOfRange(2.5)).exit_code(), 2);
        assert_eq!(
            CliError::from(Error::BudgetExceeded { count: 2, cap: 1 }).exit_code(),
            3
        );
        assert_eq!(
            CliError::from(Error::TruncationBudgetExceeded("x".into())).exit_code(),
            3
        );
        let q = Error::QuadratureFailure {
            context: "x".into(),
            tolerance: 1e-9,
            estimate: 1e-3,
        };
        assert_eq!(CliError::from(q).exit_code(), 4);
        assert_eq!(CliError::from(Error::RegimeMismatch("x".into())).exit_code(), 5);
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::VerifyFailed(1).exit_code(), 1);
    }
}
