use alloc::string::String;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("cumulant solver diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("cumulant solver undershoot {value:e} at t = {time}")]
    Undershoot { time: f64, value: f64 },

    #[error("singular matrix")]
    Singular,

    #[error("not supported by the particle scheme: {0}")]
    Unsupported(&'static str),

    #[error("particle count {0} exceeds the overflow guard")]
    ParticleOverflow(u64),

    #[error("cluster went extinct before the probe time in all {attempts} attempts")]
    ClusterExtinct { attempts: u32 },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
