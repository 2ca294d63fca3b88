use thiserror::Error;

/// Errors raised by the jet calculus.
///
/// Input errors (bad shapes, malformed files, violated preconditions) are kept
/// apart from [`LipError::Certification`], which signals that a mathematical
/// bound did not hold on the data. The CLI maps the former to exit code 1 and
/// the latter to exit code 2.
#[derive(Debug, Error)]
pub enum LipError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("tensor order {order} exceeds the supported maximum of {max}")]
    OrderCap { order: usize, max: usize },

    #[error("point {index} is not part of the jet's point set")]
    UnknownPoint { index: usize },

    #[error("points {first} and {second} coincide")]
    CoincidentPoints { first: usize, second: usize },

    #[error("image point {coords:?} of inner point {index} is missing from the outer cloud")]
    ImageNotInCloud { index: usize, coords: Vec<f64> },

    #[error("norm family lacks required property: {0}")]
    MissingNormProperty(String),

    #[error("matrix is singular (pivot {pivot:e})")]
    Singular { pivot: f64 },

    #[error("target {0:?} lies outside the certified image neighbourhood")]
    OutsideDomain(Vec<f64>),

    #[error("fixed-point iteration did not converge in {iterations} steps (last step {last_step:e})")]
    IterationCap { iterations: usize, last_step: f64 },

    #[error("integrator step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("certification failure: {0}")]
    Certification(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LipError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LipError::InvalidInput(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        LipError::DimensionMismatch(msg.into())
    }

    /// True when the error reports a violated bound rather than bad input.
    pub fn is_certification_failure(&self) -> bool {
        matches!(self, LipError::Certification(_) | LipError::IterationCap { .. })
    }
}

pub type Result<T> = std::result::Result<T, LipError>;
