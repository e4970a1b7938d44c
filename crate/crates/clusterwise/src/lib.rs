//! Clustered-data regression with cluster-robust inference: CSV ingestion,
//! the `fit` workflow, the Monte Carlo harness and its scenario catalog.

pub mod config;
pub mod csv_io;
pub mod error;
pub mod fit;
pub mod montecarlo;
pub mod report;
pub mod scenarios;

pub use clusterwise_core as core;
pub use error::{AppError, Result};
