use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("layer {layer} has width {width}, above the exact-mode cap of {cap}")]
    ExactCapacity {
        layer: usize,
        width: usize,
        cap: usize,
    },

    #[error("forward pass was computed in {found} mode, {expected} mode required")]
    ModeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("empty batch")]
    EmptyBatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tree with {edges} edges is too large for explicit construction")]
    IntractableTree { edges: usize },

    #[error("non-finite gradient at epoch {epoch}: {detail}")]
    NonFiniteGradient { epoch: usize, detail: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the numbers themselves rather than
    /// the inputs (used by the CLI to pick an exit code).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::NonFiniteGradient { .. })
    }

    pub fn is_data(&self) -> bool {
        matches!(
            self,
            Error::Format(_) | Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_)
        )
    }
}
