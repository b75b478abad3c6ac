//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("negative Lindblad rate: {0}")]
    NegativeRate(f64),
    #[error("pulse amplitude {value} at slot {slot}, control {control} outside [-1, 1]")]
    PulseOutOfRange {
        slot: usize,
        control: usize,
        value: f64,
    },
    #[error("pulse generation failed after {attempts} restarts (seed {seed}, stream {stream})")]
    GenerationFailed {
        seed: u64,
        stream: u64,
        attempts: usize,
    },
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("incompatible inputs: {0}")]
    Incompatible(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
