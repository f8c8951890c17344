use thiserror::Error;

use crate::data::ModelParams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("feature vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("item `{0}` is compared against itself")]
    SelfComparison(String),

    #[error("identifiers must be nonempty strings")]
    EmptyId,

    #[error("unknown item `{0}`")]
    UnknownItem(String),

    #[error("unknown worker `{0}`")]
    UnknownWorker(String),

    #[error("feature index {index} out of range for dimension {dim}")]
    UnknownFeature { index: usize, dim: usize },

    #[error("parameter out of domain: {0}")]
    DomainError(String),

    #[error("win probability of comparison {index} is zero or not finite")]
    NonFiniteLikelihood { index: usize },

    #[error("objective or gradient is not finite at the starting point")]
    NonFiniteStart,

    #[error("line search found no improving step after {backtracks} backtracks (iteration {iteration}, gradient norm {gradient_norm:e})")]
    LineSearchFailure {
        iteration: usize,
        backtracks: usize,
        gradient_norm: f64,
    },

    /// The comparison graph splits into several components, so scores are
    /// identified only up to a shift per component. The carried parameters
    /// have a zero-mean gauge applied to each component separately.
    #[error("comparison graph has {components} disconnected components")]
    SingularSystem {
        components: usize,
        params: Box<ModelParams>,
    },

    #[error("gold map has no strictly ordered pair")]
    NoOrderedPairs,

    #[error("input has zero variance")]
    ZeroVariance,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("model `{0}` does not support this operation")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable name used in machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::SelfComparison(_) => "SelfComparison",
            Error::EmptyId => "EmptyId",
            Error::UnknownItem(_) => "UnknownItem",
            Error::UnknownWorker(_) => "UnknownWorker",
            Error::UnknownFeature { .. } => "UnknownFeature",
            Error::DomainError(_) => "DomainError",
            Error::NonFiniteLikelihood { .. } => "NonFiniteLikelihood",
            Error::NonFiniteStart => "NonFiniteStart",
            Error::LineSearchFailure { .. } => "LineSearchFailure",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::NoOrderedPairs => "NoOrderedPairs",
            Error::ZeroVariance => "ZeroVariance",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::Unsupported(_) => "Unsupported",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Parse(_) => "Parse",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
            Error::Io(_) => "Io",
        }
    }
}
