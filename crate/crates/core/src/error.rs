use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("feature index {feature} out of range (model has {n_features} features)")]
    FeatureIndex { feature: usize, n_features: usize },

    #[error("unsupported model feature: {0}")]
    UnsupportedFeature(String),

    #[error("NaN input at row {row}, column {column}")]
    NaNInput { row: usize, column: String },

    #[error("{unique} unique features on a path exceed the depth cap of {cap}")]
    DepthCap { unique: usize, cap: usize },

    #[error("background dataset is empty")]
    EmptyBackground,

    #[error("node {node} has no cover; path-dependent mode needs covers on every path node")]
    MissingCover { node: usize },

    #[error("node {node} has zero cover")]
    ZeroCover { node: usize },

    #[error("length {0} is not a power of two or does not match")]
    Length(usize),

    #[error("size {0} exceeds the dense matrix limit")]
    Size(usize),

    #[error("matrix violates the quadrant identities: {0}")]
    Structure(String),

    #[error("interaction pair needs two distinct positions, got ({0}, {0})")]
    InvalidPair(usize),

    #[error("{active} active features exceed the brute-force limit of {limit}")]
    TooManyFeatures { active: usize, limit: usize },

    #[error("projected memory of {needed} bytes exceeds the budget of {budget} bytes")]
    BudgetExceeded { needed: u64, budget: u64 },

    #[error("{0}")]
    Invalid(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Budget violations get their own exit code in the CLI.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. })
    }
}
