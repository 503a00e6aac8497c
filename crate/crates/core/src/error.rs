use thiserror::Error;

/// Errors raised by the numeric core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operation requires a rotationally symmetric Levy measure")]
    NonSymmetricMeasure,

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("integrability condition violated: {0}")]
    IntegrabilityViolation(String),

    #[error("overlap with zero shift is infinite for a measure of infinite mass")]
    ZeroShift,

    #[error("point {0:?} is outside the support of the measure")]
    UnsupportedPoint(Vec<f64>),

    #[error("no mass beyond the truncation radius {0}")]
    EmptyTail(f64),

    #[error("sub-measures exceed the base measure (excess {0:e})")]
    SubMeasureViolation(f64),

    #[error("operation requires a discrete-atom base measure")]
    NonAtomicBase,

    #[error("compensated small-jump integral did not converge: {0}")]
    CompensationDivergence(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("noise coefficient is singular at {point:?} (reciprocal condition {rcond:e})")]
    SingularSigma { point: Vec<f64>, rcond: f64 },

    #[error("path exploded at t = {t}: |X| = {norm:e}")]
    ExplosionDetected { t: f64, norm: f64 },

    #[error("q0 exceeds q at |z| = {radius} ({q0:e} > {q:e})")]
    DensityDominationViolation { radius: f64, q0: f64, q: f64 },

    #[error("invalid Levy measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
