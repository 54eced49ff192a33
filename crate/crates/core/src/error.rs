use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample is empty")]
    EmptySample,

    #[error("sample contains a non-finite value at index {index}")]
    NonFiniteSample { index: usize },

    #[error("probability {0} is outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("model has infinite variance")]
    InfiniteVariance,

    #[error("moment of order {order} is infinite for tail index {tail_index}")]
    MomentNotFinite { order: f64, tail_index: f64 },

    #[error("quadrature did not reach tolerance: estimate {estimate}, error {error}")]
    QuadratureFailed { estimate: f64, error: f64 },

    #[error("truncated core has zero variance")]
    DegenerateTruncation,

    #[error("exhaustion violates the comparability bound at t = {t}: h(t) = {h}")]
    ExhaustionViolation { t: f64, h: f64 },

    #[error("grid is empty")]
    EmptyGrid,

    #[error("dimension {0} is not supported (expected 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("evaluation budget exceeded: {required} cells requested, limit {limit}")]
    BudgetExceeded { required: u64, limit: u64 },

    #[error("tail excess eta = {0} is not positive, no rate guarantee exists")]
    NoRateGuarantee(f64),

    #[error("regression needs at least {needed} usable points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
