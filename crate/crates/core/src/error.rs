use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the codec, protocols and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("enumeration of {requested} candidates exceeds the limit of {limit}")]
    Capacity { requested: f64, limit: f64 },

    #[error("malformed message: {0}")]
    Format(String),

    #[error("escalation failed after {iterations} iterations: next modulus would exceed r_max = {r_max}")]
    EscalationFailed { iterations: u32, r_max: u64 },

    #[error("encoder gave up after {0} iterations")]
    IterationCap(u32),

    #[error("decode failed: {0}")]
    DecodeFailure(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dataset is empty")]
    EmptyData,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(x: &[f64]) -> Result<()> {
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "coordinate {i} is not finite ({})",
            x[i]
        )));
    }
    Ok(())
}
