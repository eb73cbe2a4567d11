use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core simulation and diagnostics routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("activation `{name}` rejected: {reason}")]
    UnsupportedActivation { name: String, reason: &'static str },

    #[error("run diverged at step {step}: parameter magnitude {magnitude:e} exceeds the guard")]
    Diverged { step: u64, magnitude: f64 },

    #[error("atom counts differ ({left} vs {right}); resample to a common size first")]
    CountMismatch { left: usize, right: usize },

    #[error("snapshot grids are misaligned: no slice at t = {time}")]
    MisalignedGrid { time: f64 },

    #[error("Picard iteration did not reach tolerance {tol:e} in {} iterations (distances {distances:?})", distances.len())]
    NonConvergence { tol: f64, distances: Vec<f64> },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
