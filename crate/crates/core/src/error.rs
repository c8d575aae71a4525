use thiserror::Error;

/// Errors raised by the regularity toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance matrices differ; the closed form requires a shared covariance")]
    CovarianceMismatch,

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("outside the admissible regime: {0}")]
    OutsideRegime(String),

    #[error("schedule violates feasibility: {0}")]
    InfeasibleSchedule(String),

    #[error("quadrature did not converge: estimated error {achieved:e} exceeds tolerance {tolerance:e}")]
    QuadratureNotConverged { achieved: f64, tolerance: f64 },

    #[error("density mass drifted to {mass} (tolerance 1e-6)")]
    MassDrift { mass: f64 },

    #[error("domain too small: boundary density is {ratio:e} of peak (limit 1e-12)")]
    DomainTooSmall { ratio: f64 },

    #[error("density became negative ({value:e}) at x = {x}")]
    NegativeDensity { x: f64, value: f64 },

    #[error("shift {shift} exits the usable domain (max |v| = {limit})")]
    ShiftExitsDomain { shift: f64, limit: f64 },

    #[error("test function is not positive at x = {x} (value {value})")]
    NonPositiveTestFunction { x: f64, value: f64 },

    #[error("cannot condition on zero-probability state {state} of {which}")]
    ZeroProbabilityConditioning { state: usize, which: &'static str },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("transport problem is infeasible: {0}")]
    InfeasibleTransport(String),

    #[error("moment generating function would overflow at lambda = {lambda} (require |lambda| sqrt(beta) <= 3)")]
    MgfOverflow { lambda: f64 },

    #[error("need at least {required} samples for the requested tail level, have {available}")]
    InsufficientSamples { required: usize, available: usize },

    #[error("potential is not normalizable on the truncation domain: {0}")]
    Unnormalizable(String),

    #[error("unknown bound kind `{0}`")]
    UnknownKind(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

pub(crate) fn check_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and >= 0",
        })
    }
}
