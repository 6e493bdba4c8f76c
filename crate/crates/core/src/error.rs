use thiserror::Error;

/// Errors raised by the analysis toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("atom undersampled: rate * sigma = {0:.3} (< 4)")]
    Undersampled(f64),

    #[error("explicit penalty matrix of size {0} exceeds the limit of {1}")]
    TooLarge(usize, usize),

    #[error("residual bound {xi:.6e} is below the distance {distance:.6e} from the target to the range of the dictionary")]
    Infeasible { xi: f64, distance: f64 },

    #[error("eigendecomposition failed")]
    Eigen,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("signal of {len} samples is shorter than one window of {window} samples")]
    TooShort { len: usize, window: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {file}: {reason}")]
    Parse { file: String, reason: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
