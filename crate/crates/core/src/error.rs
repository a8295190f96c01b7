use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{field} = {value} outside valid range [{lo}, {hi}]")]
    Domain {
        field: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("across-track distance {0} km is outside the swath [0, 550)")]
    OutOfSwath(f64),

    #[error("unknown pixel class {0}")]
    UnknownClass(u8),

    #[error("matrix is not positive definite (failed at pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("box {0} has no bias entry")]
    MissingBox(u64),

    #[error("network normalization has not been fitted")]
    Unfitted,

    #[error("class mismatch: expected {expected}, found {found}")]
    ClassMismatch { expected: u8, found: u8 },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("parse error in {path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("calibration failed for class {class}: residual/raw ratio {ratio:.3} outside [{lo}, {hi}]")]
    Calibration {
        class: u8,
        ratio: f64,
        lo: f64,
        hi: f64,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_range(field: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::Domain { field, value, lo, hi })
    }
}
