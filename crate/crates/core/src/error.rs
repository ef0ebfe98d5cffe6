use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCountMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, field {field}: value {value:?} is not a finite number")]
    NonFiniteValue {
        line: usize,
        field: usize,
        value: String,
    },
    #[error("line {line}: rotation block of joint {joint} deviates from orthonormal by {deviation:.3e}")]
    NonOrthonormalBeyondTolerance {
        line: usize,
        joint: &'static str,
        deviation: f64,
    },
    #[error("frame indices must be strictly increasing ({previous} then {next})")]
    NonIncreasingFrames { previous: u64, next: u64 },
    #[error("image count {images} does not match frame count {frames}")]
    MisalignedImages { images: usize, frames: usize },
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("motion script has no keyframes")]
    EmptyScript,
    #[error("not a rotation matrix (deviation {0:.3e})")]
    InvalidRotation(f64),
    #[error("bounding box ({x0},{y0})-({x1},{y1}) is degenerate for a {width}x{height} grid")]
    DegenerateBox {
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
        width: usize,
        height: usize,
    },
    #[error("joint {0} lies behind the camera")]
    JointBehindCamera(&'static str),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("cluster {cluster} collapsed (weight {weight:.3e}) after reseeding")]
    DegenerateCluster { cluster: usize, weight: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no training data for activity {0:?}")]
    MissingActivityData(String),
    #[error("window of length {len} exceeds the substructure cap {cap}")]
    WindowTooLong { len: usize, cap: usize },
    #[error("window must contain at least one frame")]
    EmptyWindow,
    #[error("detector state is not initialized")]
    UninitializedState,
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed input rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::FieldCountMismatch { .. }
                | Error::NonFiniteValue { .. }
                | Error::NonOrthonormalBeyondTolerance { .. }
                | Error::NonIncreasingFrames { .. }
                | Error::MisalignedImages { .. }
                | Error::InvalidSequence(_)
                | Error::EmptyScript
                | Error::InvalidConfig(_)
                | Error::Io { .. }
                | Error::Format { .. }
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
