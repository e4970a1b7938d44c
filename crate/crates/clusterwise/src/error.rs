use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

/// Process exit codes of the `clusterwise` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("input has no data rows")]
    EmptyFile,
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("line {line}, column `{column}`: cannot parse `{value}` as a number")]
    ParseError { line: u64, column: String, value: String },
    #[error("line {line}, column `{column}`: missing value (use --drop-na to drop such rows)")]
    MissingValue { line: u64, column: String },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("no clusters left after dropping clusters smaller than {min_size}")]
    AllClustersDropped { min_size: usize },
    #[error(transparent)]
    Model(clusterwise_core::Error),
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] DataError),
    #[error("numerical failure: {0}")]
    Numerical(clusterwise_core::Error),
    #[error("{context}: replication {replication} failed: {source}")]
    Replication {
        context: String,
        replication: usize,
        #[source]
        source: clusterwise_core::Error,
    },
    #[error("{estimator} Wald test `{hypothesis}`: {source}")]
    Wald {
        hypothesis: String,
        estimator: &'static str,
        #[source]
        source: clusterwise_core::Error,
    },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => exit::CONFIG,
            AppError::Data(_) | AppError::Output { .. } => exit::DATA,
            AppError::Numerical(_) | AppError::Replication { .. } | AppError::Wald { .. } => exit::NUMERICAL,
        }
    }
}

impl From<clusterwise_core::Error> for AppError {
    /// Sorts library errors by who has to fix them.
    fn from(e: clusterwise_core::Error) -> Self {
        use clusterwise_core::Error as E;
        match e {
            E::InvalidSpec(_) | E::DomainError(_) | E::RankDeficientR => AppError::Config(e.to_string()),
            E::DimensionMismatch(_) | E::NonFiniteData(_) | E::EmptyDataset | E::InsufficientClusters { .. } => {
                AppError::Data(DataError::Model(e))
            }
            _ => AppError::Numerical(e),
        }
    }
}
