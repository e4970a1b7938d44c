//! Cluster-robust linear regression.
//!
//! Two estimators are provided for data that arrive in independent clusters
//! with arbitrary within-cluster error dependence:
//!
//! * the pooled OLS estimator with the cluster-robust sandwich (CRVE), and
//! * the cluster-averaging estimator: OLS on per-cluster means, which turns
//!   within-cluster dependence into plain heteroskedasticity across clusters
//!   and is paired with a White-type sandwich.
//!
//! Alongside the estimators the crate carries Wald inference, chi-square
//! distribution functions, generators for within-cluster covariance matrices
//! of each dependence class, and the simulation designs used to study the
//! two estimators.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the Monte
//! Carlo engine and the command line live in the `clusterwise` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod covgen;
pub mod data;
pub mod dgp;
pub mod distributions;
mod error;
pub mod estimators;
pub mod inference;
pub mod linalg;
pub mod numeric;

pub use error::{Error, Result};
pub use linalg::Matrix;
