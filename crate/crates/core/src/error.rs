//! Error type shared across the toolkit.

use thiserror::Error;

/// Errors produced by matching, optimization, and coverage operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cosine distance is undefined for a zero vector")]
    ZeroVectorCosine,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset is degenerate: {0}")]
    DegenerateDataset(String),

    #[error("duplicate identity id {0}")]
    DuplicateId(u32),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("candidate has no fitness value")]
    UnevaluatedCandidate,

    #[error("candidate fitness is not finite")]
    NonFiniteFitness,

    #[error("population size mismatch: expected {expected}, got {got}")]
    PopulationSize { expected: usize, got: usize },

    #[error("evaluation budget {budget} is smaller than the population size {lambda}")]
    BudgetTooSmall { budget: u64, lambda: usize },

    #[error("covariance repair failed: {0}")]
    CovarianceRepair(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Convenience constructor for parameter validation failures.
    pub fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
