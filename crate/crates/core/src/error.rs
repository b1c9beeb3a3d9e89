use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("hamiltonian is not hermitian (max deviation {0:.3e})")]
    NonHermitian(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("trace drifted by {drift:.3e} at t = {time_us} us; reduce the integration step")]
    StepSize { drift: f64, time_us: f64 },

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("coherence time t2 = {t2} ms is not below t1 = {t1} ms")]
    Unphysical { t2: f64, t1: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
