//! Wald tests of linear restrictions and coefficient tables.

use alloc::string::String;
use alloc::vec::Vec;

use crate::distributions::{chi2_sf, normal_sf, student_t_two_sided};
use crate::estimators::FitResult;
use crate::linalg::{cholesky, symmetric_eigenvalues, Matrix, Qr, RANK_TOLERANCE};
use crate::{Error, Result};

/// Largest condition number of `R V R'` accepted before a Wald test refuses
/// to run.
pub const MAX_RESTRICTED_CONDITION: f64 = 1e12;

/// `H0: R beta = r` with `R` of shape `l x k`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearHypothesis {
    pub restriction: Matrix,
    pub rhs: Vec<f64>,
}

impl LinearHypothesis {
    pub fn new(restriction: Matrix, rhs: Vec<f64>) -> Result<Self> {
        if restriction.rows() == 0 || restriction.rows() != rhs.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "restriction has {} rows but r has {} entries",
                restriction.rows(),
                rhs.len()
            )));
        }
        if !restriction.all_finite() || !rhs.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteData("hypothesis".into()));
        }
        Ok(Self { restriction, rhs })
    }

    /// `beta_j = value` in a model with `k` coefficients.
    pub fn coefficient(k: usize, j: usize, value: f64) -> Result<Self> {
        if j >= k {
            return Err(Error::DimensionMismatch(alloc::format!("coefficient {j} of {k}")));
        }
        let mut r = Matrix::zeros(1, k);
        r[(0, j)] = 1.0;
        Self::new(r, alloc::vec![value])
    }

    pub fn n_restrictions(&self) -> usize {
        self.restriction.rows()
    }

    fn validate(&self, k: usize) -> Result<()> {
        if self.restriction.cols() != k {
            return Err(Error::DimensionMismatch(alloc::format!(
                "restriction has {} columns for {k} coefficients",
                self.restriction.cols()
            )));
        }
        if self.n_restrictions() > k {
            return Err(Error::RankDeficientR);
        }
        let qr = Qr::new(&self.restriction.transpose())?;
        if qr.rank(RANK_TOLERANCE) < self.n_restrictions() {
            return Err(Error::RankDeficientR);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WaldResult {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    /// `(level, rejected)` for the requested level and 0.01, 0.05, 0.10.
    pub reject_at: Vec<(f64, bool)>,
}

/// `(R b - r)' (R V R')^{-1} (R b - r)` for an arbitrary estimate and covariance.
pub fn wald_statistic(beta: &[f64], cov: &Matrix, hyp: &LinearHypothesis) -> Result<f64> {
    let k = beta.len();
    if cov.rows() != k || cov.cols() != k {
        return Err(Error::DimensionMismatch(alloc::format!(
            "covariance is {}x{} for {k} coefficients",
            cov.rows(),
            cov.cols()
        )));
    }
    hyp.validate(k)?;
    let rmat = &hyp.restriction;
    let diff: Vec<f64> = rmat
        .matvec(beta)?
        .iter()
        .zip(&hyp.rhs)
        .map(|(a, b)| a - b)
        .collect();
    let mut restricted = Matrix::sandwich(rmat, cov)?;
    restricted.symmetrize();

    let eig = symmetric_eigenvalues(&restricted)?;
    let (min, max) = (eig[0], eig[eig.len() - 1]);
    if !(min > 0.0) || max / min > MAX_RESTRICTED_CONDITION {
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(Error::SingularRestrictedCov { condition });
    }

    let l = cholesky(&restricted).map_err(|_| Error::SingularRestrictedCov {
        condition: max / min,
    })?;
    // Forward substitution: z = L^{-1} diff, statistic = |z|^2.
    let mut z = alloc::vec![0.0; diff.len()];
    for i in 0..diff.len() {
        let s: f64 = (0..i).map(|j| l[(i, j)] * z[j]).sum();
        z[i] = (diff[i] - s) / l[(i, i)];
    }
    Ok(z.iter().map(|v| v * v).sum())
}

/// Wald test of `hyp` using the fit's robust covariance, referred to
/// chi-square with `l` degrees of freedom.
pub fn wald_test(fit: &FitResult, hyp: &LinearHypothesis, level: f64) -> Result<WaldResult> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::DomainError(alloc::format!("test level {level} outside (0, 1)")));
    }
    let statistic = wald_statistic(&fit.beta, &fit.cov, hyp)?;
    let df = hyp.n_restrictions() as u32;
    let p_value = chi2_sf(statistic, df)?;
    let mut levels: Vec<f64> = alloc::vec![0.01, 0.05, 0.10, level];
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let reject_at = levels.into_iter().map(|a| (a, p_value < a)).collect();
    Ok(WaldResult {
        statistic,
        df,
        p_value,
        reject_at,
    })
}

/// Reference distribution for coefficient p-values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PValueReference {
    #[default]
    Normal,
    /// Student t with `G - 1` degrees of freedom.
    StudentClusters,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoefRow {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub t_value: f64,
    pub p_value: f64,
    /// The standard error is zero and the t-ratio is reported as infinite.
    pub degenerate_se: bool,
}

/// One row per coefficient with two-sided p-values. Missing names become
/// `b0`, `b1`, ...
pub fn coef_table(fit: &FitResult, names: &[&str], reference: PValueReference) -> Result<Vec<CoefRow>> {
    let df = (fit.n_clusters.max(2) - 1) as f64;
    fit.beta
        .iter()
        .zip(&fit.se)
        .enumerate()
        .map(|(j, (&estimate, &se))| {
            let name = names
                .get(j)
                .map(|s| String::from(*s))
                .unwrap_or_else(|| alloc::format!("b{j}"));
            let degenerate_se = se == 0.0;
            let (t_value, p_value) = if degenerate_se {
                let t = if estimate < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
                (t, 0.0)
            } else {
                let t = estimate / se;
                let p = match reference {
                    PValueReference::Normal => 2.0 * normal_sf(libm::fabs(t)),
                    PValueReference::StudentClusters => student_t_two_sided(t, df)?,
                };
                (t, p)
            };
            Ok(CoefRow {
                name,
                estimate,
                se,
                t_value,
                p_value,
                degenerate_se,
            })
        })
        .collect()
}
