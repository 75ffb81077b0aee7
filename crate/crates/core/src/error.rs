use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Fock truncation: n_max must be >= 1, got {0}")]
    InvalidTruncation(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state norm collapsed to {0:e}; expectation values are undefined")]
    ZeroNorm(f64),

    #[error(
        "coherent state with mean photon number {mean_photons} loses {lost:e} of its norm \
         at n_max = {n_max}; raise n_max"
    )]
    CoherentTruncation {
        mean_photons: f64,
        n_max: usize,
        lost: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("step size underflow at t = {t}: h = {h:e} (problem looks stiff)")]
    StepUnderflow { t: f64, h: f64 },

    #[error("Casimir operator has non-positive diagonal entry {value} at index {index}")]
    NonPositiveCasimir { index: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
