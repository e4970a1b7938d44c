use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFiniteData(String),

    #[error("dataset has no clusters")]
    EmptyDataset,

    #[error("design is rank deficient: effective rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("{clusters} clusters cannot identify {params} parameters")]
    InsufficientClusters { clusters: usize, params: usize },

    #[error("response has zero variation")]
    DegenerateVariance,

    #[error("restricted covariance R V R' is numerically singular (condition number {condition:e})")]
    SingularRestrictedCov { condition: f64 },

    #[error("restriction matrix R does not have full row rank")]
    RankDeficientR,

    #[error("argument outside domain: {0}")]
    DomainError(String),

    #[error("matrix is not positive semi-definite (pivot {pivot:e})")]
    NotPsd { pivot: f64 },

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}
