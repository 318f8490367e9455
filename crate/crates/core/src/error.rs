use thiserror::Error;

/// Errors produced by the library.
///
/// Variants split into two families: input validation ([`Error::is_validation`])
/// and numerical failures that arise while computing on valid input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("row {row}: {reason}")]
    Parse { row: usize, reason: String },
    #[error("particle {to} is unreachable from particle {from}")]
    Unreachable { from: usize, to: usize },
    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),
    #[error("density {value} at {at:?} exceeds the declared upper bound {bound}")]
    EnvelopeViolated { value: f64, at: Vec<f64>, bound: f64 },
    #[error("rejection sampler acceptance rate {rate:e} is below 1e-6")]
    PathologicalEnvelope { rate: f64 },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("grid would have {nodes} nodes, above the cap of {cap}; increase the spacing h")]
    GridTooLarge { nodes: u64, cap: u64 },
    #[error("chart is not an isometry: {0}")]
    NotIsometric(String),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by malformed or inconsistent input.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::EmptyCloud
                | Error::DimensionMismatch { .. }
                | Error::InvalidParameter { .. }
                | Error::Parse { .. }
                | Error::OutsideDomain(_)
                | Error::GridTooLarge { .. }
                | Error::NotIsometric(_)
                | Error::Format(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
