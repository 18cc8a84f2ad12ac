use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver did not converge after {iterations} iterations (best iterate {best:?})")]
    NonConvergence { iterations: usize, best: Vec<f64> },

    #[error("target utility {target} is unattainable below the expenditure cap {cap:e}")]
    Unattainable { target: f64, cap: f64 },

    #[error("{0} requires an identity transform (cardinal utility)")]
    CardinalRequiresIdentity(&'static str),

    #[error("utility is not independently homogeneous: {0}")]
    NotIndependentlyHomogeneous(String),

    #[error("declared homogeneity degree rejected: {0}")]
    DeclarationRejected(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Unattainable { .. } | Error::Domain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
