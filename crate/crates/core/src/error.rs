use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("node {0} was issued by a different graph")]
    ForeignNode(usize),

    #[error("log of non-positive value {0}")]
    LogDomain(f64),

    #[error("backward root must be scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),

    #[error("invalid reduction: {0}")]
    Reduction(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("unsupported actor variant for this operation: {0}")]
    Variant(String),

    #[error("invalid diffusion step index {index} (schedule has {steps} steps)")]
    StepIndex { index: usize, steps: usize },

    #[error("numerical failure at epoch {epoch}: {what}")]
    Numerical { epoch: usize, what: String },

    #[error("malformed parameter file: {0}")]
    Format(String),

    #[error("malformed metrics file: {0}")]
    Metrics(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
