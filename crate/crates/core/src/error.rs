use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sampling mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("value {value} outside domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    /// The normal equations could not be solved reliably.
    #[error("singular linear system (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    /// Denominator sin(ω·(t2 − t1)) is within the guard of zero.
    #[error("numeric guard triggered: {0}")]
    NumericGuard(String),

    /// The component is a zero-frequency line and has no amplitude/phase.
    #[error("component at ω = {omega:e} rad/s is a trend line")]
    TrendComponent { omega: f64 },
}

pub(crate) fn ensure_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite, got {v}")))
    }
}
