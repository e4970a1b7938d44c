//! Pooled OLS with the cluster-robust sandwich, and the cluster-averaging
//! estimator with its heteroskedasticity-robust sandwich.
//!
//! Both estimators solve their least-squares problem through a thin QR
//! factorisation; the bread `(X'X)^{-1}` of each sandwich comes from the R
//! factor. Neither sandwich carries a small-sample correction unless
//! [`FitOptions::df_correction`] is set.

use alloc::vec::Vec;

use crate::data::{block_means, ClusteredDataset};
use crate::linalg::{dot, Matrix, Qr};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EstimatorKind {
    Pooled,
    Averaged,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Pooled => "pooled",
            EstimatorKind::Averaged => "averaged",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitOptions {
    /// Scale the pooled CRVE by `G/(G-1) * (n-1)/(n-k)` and the averaged
    /// sandwich by `G/(G-k)`.
    pub df_correction: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitResult {
    pub kind: EstimatorKind,
    pub beta: Vec<f64>,
    pub cov: Matrix,
    pub se: Vec<f64>,
    /// Per observation for pooled fits, per cluster for averaged fits.
    pub residuals: Vec<f64>,
    /// `sum N_g` for pooled fits, `G` for averaged fits.
    pub n_effective: usize,
    pub n_clusters: usize,
    pub df_model: usize,
    pub has_intercept: bool,
    pub df_correction: bool,
}

impl FitResult {
    pub fn n_params(&self) -> usize {
        self.beta.len()
    }
}

/// True when some column is constant and non-zero.
pub fn detect_intercept(x: &Matrix) -> bool {
    if x.rows() == 0 {
        return false;
    }
    (0..x.cols()).any(|j| {
        let first = x[(0, j)];
        first != 0.0 && (1..x.rows()).all(|i| x[(i, j)] == first)
    })
}

fn standard_errors(cov: &Matrix) -> Vec<f64> {
    cov.diagonal().iter().map(|v| libm::sqrt(v.max(0.0))).collect()
}

/// Stacked design with a cached QR factorisation, reusable across responses.
#[derive(Debug, Clone)]
pub struct PooledDesign {
    x: Matrix,
    offsets: Vec<usize>,
    qr: Qr,
    bread: Matrix,
    has_intercept: bool,
}

impl PooledDesign {
    /// `x` stacks the clusters in order; `sizes[g]` is the row count of cluster `g`.
    pub fn new(x: Matrix, sizes: &[usize]) -> Result<Self> {
        let total: usize = sizes.iter().sum();
        if total != x.rows() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "cluster sizes sum to {total} but the design has {} rows",
                x.rows()
            )));
        }
        if sizes.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let qr = Qr::new(&x)?;
        let bread = qr.gram_inverse()?;
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for s in sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        let has_intercept = detect_intercept(&x);
        Ok(Self {
            x,
            offsets,
            qr,
            bread,
            has_intercept,
        })
    }

    pub fn from_dataset(ds: &ClusteredDataset) -> Result<Self> {
        Self::new(ds.stacked_x(), &ds.cluster_sizes())
    }

    pub fn n_clusters(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    /// `(X'X)^{-1}`.
    pub fn bread(&self) -> &Matrix {
        &self.bread
    }

    pub fn fit(&self, y: &[f64], opts: FitOptions) -> Result<FitResult> {
        let beta = self.qr.solve_least_squares(y)?;
        let k = beta.len();
        let n = self.x.rows();
        let g = self.n_clusters();
        let residuals: Vec<f64> = (0..n).map(|i| y[i] - dot(self.x.row(i), &beta)).collect();

        let mut meat = Matrix::zeros(k, k);
        let mut score = alloc::vec![0.0; k];
        for w in self.offsets.windows(2) {
            score.iter_mut().for_each(|s| *s = 0.0);
            for i in w[0]..w[1] {
                let u = residuals[i];
                for (s, &x) in score.iter_mut().zip(self.x.row(i)) {
                    *s += x * u;
                }
            }
            meat.add_outer(&score, 1.0);
        }
        let mut cov = Matrix::sandwich(&self.bread, &meat)?;
        if opts.df_correction {
            if g < 2 || n <= k {
                return Err(Error::InsufficientClusters { clusters: g, params: k });
            }
            let c = (g as f64 / (g - 1) as f64) * ((n - 1) as f64 / (n - k) as f64);
            cov = cov.scaled(c);
        }
        Ok(FitResult {
            kind: EstimatorKind::Pooled,
            se: standard_errors(&cov),
            beta,
            cov,
            residuals,
            n_effective: n,
            n_clusters: g,
            df_model: k,
            has_intercept: self.has_intercept,
            df_correction: opts.df_correction,
        })
    }
}

/// Design of cluster means with a cached QR factorisation.
#[derive(Debug, Clone)]
pub struct AveragedDesign {
    xbar: Matrix,
    qr: Qr,
    bread: Matrix,
    has_intercept: bool,
}

impl AveragedDesign {
    pub fn new(xbar: Matrix) -> Result<Self> {
        let (g, k) = (xbar.rows(), xbar.cols());
        if g < k {
            return Err(Error::InsufficientClusters { clusters: g, params: k });
        }
        let qr = Qr::new(&xbar)?;
        let bread = qr.gram_inverse()?;
        let has_intercept = detect_intercept(&xbar);
        Ok(Self {
            xbar,
            qr,
            bread,
            has_intercept,
        })
    }

    /// Averages each block of `x_blocks` and factors the result.
    pub fn from_blocks(x_blocks: &[&Matrix]) -> Result<Self> {
        let k = x_blocks.first().map_or(0, |b| b.cols());
        let mut data = Vec::with_capacity(x_blocks.len() * k);
        for b in x_blocks {
            data.extend(block_means(b));
        }
        Self::new(Matrix::from_row_major(x_blocks.len(), k, data)?)
    }

    pub fn from_dataset(ds: &ClusteredDataset) -> Result<Self> {
        let blocks: Vec<&Matrix> = ds.blocks().iter().map(|b| b.x()).collect();
        Self::from_blocks(&blocks)
    }

    pub fn xbar(&self) -> &Matrix {
        &self.xbar
    }

    /// `(Xbar'Xbar)^{-1}`.
    pub fn bread(&self) -> &Matrix {
        &self.bread
    }

    /// Fits the averaged model to cluster-mean responses.
    pub fn fit(&self, ybar: &[f64], opts: FitOptions) -> Result<FitResult> {
        let beta = self.qr.solve_least_squares(ybar)?;
        let (g, k) = (self.xbar.rows(), self.xbar.cols());
        let residuals: Vec<f64> = (0..g)
            .map(|i| ybar[i] - dot(self.xbar.row(i), &beta))
            .collect();
        let mut meat = Matrix::zeros(k, k);
        for (i, e) in residuals.iter().enumerate() {
            meat.add_outer(self.xbar.row(i), e * e);
        }
        let mut cov = Matrix::sandwich(&self.bread, &meat)?;
        if opts.df_correction {
            if g <= k {
                return Err(Error::InsufficientClusters { clusters: g, params: k });
            }
            cov = cov.scaled(g as f64 / (g - k) as f64);
        }
        Ok(FitResult {
            kind: EstimatorKind::Averaged,
            se: standard_errors(&cov),
            beta,
            cov,
            residuals,
            n_effective: g,
            n_clusters: g,
            df_model: k,
            has_intercept: self.has_intercept,
            df_correction: opts.df_correction,
        })
    }

    /// Averages each response block and fits.
    pub fn fit_blocks(&self, y_blocks: &[&[f64]], opts: FitOptions) -> Result<FitResult> {
        let ybar: Vec<f64> = y_blocks.iter().map(|y| crate::data::mean(y)).collect();
        self.fit(&ybar, opts)
    }
}

pub fn fit_pooled(ds: &ClusteredDataset) -> Result<FitResult> {
    fit_pooled_with(ds, FitOptions::default())
}

pub fn fit_pooled_with(ds: &ClusteredDataset, opts: FitOptions) -> Result<FitResult> {
    PooledDesign::from_dataset(ds)?.fit(&ds.stacked_y(), opts)
}

pub fn fit_averaged(ds: &ClusteredDataset) -> Result<FitResult> {
    fit_averaged_with(ds, FitOptions::default())
}

pub fn fit_averaged_with(ds: &ClusteredDataset, opts: FitOptions) -> Result<FitResult> {
    let design = AveragedDesign::from_dataset(ds)?;
    let y_blocks: Vec<&[f64]> = ds.blocks().iter().map(|b| b.y()).collect();
    design.fit_blocks(&y_blocks, opts)
}

fn check_omegas(x_blocks: &[&Matrix], omegas: &[Matrix]) -> Result<()> {
    if x_blocks.len() != omegas.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} clusters but {} covariance matrices",
            x_blocks.len(),
            omegas.len()
        )));
    }
    for (g, (x, o)) in x_blocks.iter().zip(omegas).enumerate() {
        if o.rows() != x.rows() || o.cols() != x.rows() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "cluster {g}: covariance is {}x{} for {} observations",
                o.rows(),
                o.cols(),
                x.rows()
            )));
        }
    }
    Ok(())
}

/// `Var(beta_A | X)` for known within-cluster covariances:
/// `(Xbar'Xbar)^{-1} (sum_g xbar_g xbar_g' 1'Omega_g 1 / N_g^2) (Xbar'Xbar)^{-1}`.
pub fn true_variance_averaged(x_blocks: &[&Matrix], omegas: &[Matrix]) -> Result<Matrix> {
    check_omegas(x_blocks, omegas)?;
    let design = AveragedDesign::from_blocks(x_blocks)?;
    let k = design.xbar.cols();
    let mut meat = Matrix::zeros(k, k);
    for (g, o) in omegas.iter().enumerate() {
        let n = o.rows() as f64;
        let total: f64 = o.as_slice().iter().sum();
        meat.add_outer(design.xbar.row(g), total / (n * n));
    }
    Matrix::sandwich(&design.bread, &meat)
}

/// `Var(beta_P | X) = (X'X)^{-1} (sum_g X_g' Omega_g X_g) (X'X)^{-1}`.
pub fn true_variance_pooled(x_blocks: &[&Matrix], omegas: &[Matrix]) -> Result<Matrix> {
    check_omegas(x_blocks, omegas)?;
    let k = x_blocks.first().map_or(0, |b| b.cols());
    let mut data = Vec::new();
    let mut sizes = Vec::with_capacity(x_blocks.len());
    for b in x_blocks {
        data.extend_from_slice(b.as_slice());
        sizes.push(b.rows());
    }
    let stacked = Matrix::from_row_major(sizes.iter().sum(), k, data)?;
    let design = PooledDesign::new(stacked, &sizes)?;
    let mut meat = Matrix::zeros(k, k);
    for (x, o) in x_blocks.iter().zip(omegas) {
        let ox = o.matmul(x)?;
        meat = meat.add(&x.transpose().matmul(&ox)?)?;
    }
    meat.symmetrize();
    Matrix::sandwich(&design.bread, &meat)
}

/// Goodness-of-fit summary for one fitted model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GofMetrics {
    pub r2: f64,
    pub adj_r2: f64,
    /// Squared correlation between fitted and observed values.
    pub pseudo_r2: f64,
    /// Gaussian concentrated log-likelihood; NaN when `perfect_fit`.
    pub aic: f64,
    pub bic: f64,
    pub n_used: usize,
    pub n_params: usize,
    /// SSR is exactly zero, so AIC/BIC are undefined.
    pub perfect_fit: bool,
}

/// R², adjusted R², pseudo R², AIC and BIC of `fit` against the response it
/// was fitted to (stacked `Y` for pooled fits, cluster means for averaged).
pub fn goodness_of_fit(fit: &FitResult, y_used: &[f64]) -> Result<GofMetrics> {
    let n = y_used.len();
    if n != fit.residuals.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} responses for {} residuals",
            n,
            fit.residuals.len()
        )));
    }
    let k = fit.df_model;
    let ybar = crate::data::mean(y_used);
    let ssr: f64 = fit.residuals.iter().map(|e| e * e).sum();
    let sst: f64 = if fit.has_intercept {
        y_used.iter().map(|y| (y - ybar) * (y - ybar)).sum()
    } else {
        y_used.iter().map(|y| y * y).sum()
    };
    if sst == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let r2 = 1.0 - ssr / sst;
    let nf = n as f64;
    let adj_r2 = if n > k {
        1.0 - (1.0 - r2) * (nf - 1.0) / (nf - k as f64)
    } else {
        f64::NAN
    };

    let fitted: Vec<f64> = y_used.iter().zip(&fit.residuals).map(|(y, e)| y - e).collect();
    let fbar = crate::data::mean(&fitted);
    let (mut sfy, mut sff, mut syy) = (0.0, 0.0, 0.0);
    for (f, y) in fitted.iter().zip(y_used) {
        sfy += (f - fbar) * (y - ybar);
        sff += (f - fbar) * (f - fbar);
        syy += (y - ybar) * (y - ybar);
    }
    let pseudo_r2 = if sff <= 0.0 || syy <= 0.0 {
        0.0
    } else {
        (sfy * sfy) / (sff * syy)
    };

    let perfect_fit = ssr == 0.0;
    let (aic, bic) = if perfect_fit {
        (f64::NAN, f64::NAN)
    } else {
        let ll = nf * libm::log(ssr / nf);
        (ll + 2.0 * k as f64, ll + k as f64 * libm::log(nf))
    };
    Ok(GofMetrics {
        r2,
        adj_r2,
        pseudo_r2,
        aic,
        bic,
        n_used: n,
        n_params: k,
        perfect_fit,
    })
}
