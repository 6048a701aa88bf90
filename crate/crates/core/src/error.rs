use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = QstError> = std::result::Result<T, E>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum QstError {
    #[error("unsupported qubit count {0} (supported: 2, 3)")]
    UnsupportedQubitCount(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("degenerate alpha vector (trace of L L^dagger = {0:e})")]
    DegenerateAlpha(f64),
    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("unitary block `{0}` fails V V^dagger = I")]
    NonUnitaryBlock(&'static str),
    #[error("set count {requested} outside 1..={available}")]
    OutOfRange { requested: usize, available: usize },
    #[error("design matrix rank {0} is degenerate")]
    DegenerateDesign(usize),
    #[error("zero probability for outcome {index} with observed frequency {frequency}")]
    ZeroProbability { index: usize, frequency: f64 },
    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("format mismatch: expected {expected:?}, found {found:?}")]
    FormatVersionMismatch { expected: String, found: String },
    #[error("missing model file {0}")]
    MissingModel(PathBuf),
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("exactness sentinel violated: {0}")]
    Sentinel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl QstError {
    /// Short stable tag used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            QstError::UnsupportedQubitCount(_) => "UnsupportedQubitCount",
            QstError::DimensionMismatch { .. } => "DimensionMismatch",
            QstError::ShapeMismatch(_) => "ShapeMismatch",
            QstError::InvalidParameter { .. } => "InvalidParameter",
            QstError::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            QstError::DegenerateAlpha(_) => "DegenerateAlpha",
            QstError::NotHermitian(_) => "NotHermitian",
            QstError::NonUnitaryBlock(_) => "NonUnitaryBlock",
            QstError::OutOfRange { .. } => "OutOfRange",
            QstError::DegenerateDesign(_) => "DegenerateDesign",
            QstError::ZeroProbability { .. } => "ZeroProbability",
            QstError::NonFiniteLoss { .. } => "NonFiniteLoss",
            QstError::FormatVersionMismatch { .. } => "FormatVersionMismatch",
            QstError::MissingModel(_) => "MissingModel",
            QstError::Config { .. } => "Config",
            QstError::Sentinel(_) => "Sentinel",
            QstError::Io(_) => "IoError",
        }
    }
}
