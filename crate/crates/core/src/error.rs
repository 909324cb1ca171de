use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter record violated one of its invariants.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("insufficient data: need at least {needed} events, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("quadrature did not reach relative tolerance {tolerance:e} (estimated error {error:e} after {evaluations} evaluations)")]
    QuadratureFailed {
        tolerance: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("operation requires noise mode `{expected}`")]
    WrongNoiseMode { expected: &'static str },

    #[error("sample mean {mean} exceeds half the Poisson cutoff {l_max}")]
    TruncationBias { mean: f64, l_max: u32 },

    #[error("goodness of fit needs at least 4 merged bins, got {0}")]
    TooFewBins(usize),

    #[error("calibration target unreachable: {0}")]
    Calibration(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
