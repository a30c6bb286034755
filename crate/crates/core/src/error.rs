use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Each variant maps to a stable machine-readable code (see [`Error::code`])
/// that the command-line front end prints alongside the message.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("matrix is not symmetric: |m[{row}][{col}] - m[{col}][{row}]| = {deviation:e}")]
    Asymmetric { row: usize, col: usize, deviation: f64 },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid connectivity matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("missing label for subject `{0}`")]
    MissingLabel(String),

    #[error("{path}:{line}: {detail}")]
    Parse { path: PathBuf, line: usize, detail: String },

    #[error("node count mismatch: expected {expected} nodes, found {found}")]
    NodeCount { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training diverged in fold {fold} at epoch {epoch}: {detail}")]
    Diverged { fold: usize, epoch: usize, detail: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable identifier for diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "E_SHAPE",
            Error::Asymmetric { .. } => "E_ASYMMETRIC",
            Error::NonFinite { .. } => "E_NONFINITE",
            Error::InvalidMatrix(_) => "E_MATRIX",
            Error::InvalidArgument(_) => "E_ARGUMENT",
            Error::Dataset(_) => "E_DATASET",
            Error::MissingLabel(_) => "E_MISSING_LABEL",
            Error::Parse { .. } => "E_PARSE",
            Error::NodeCount { .. } => "E_NODE_COUNT",
            Error::Config(_) => "E_CONFIG",
            Error::Checkpoint(_) => "E_CHECKPOINT",
            Error::Diverged { .. } => "E_DIVERGED",
            Error::Io { .. } => "E_IO",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
