//! Within-cluster covariance generators, a dependence classifier and a
//! multivariate normal sampler.
//!
//! Dependence classes are defined by how fast `lambda_max(Omega)` grows with
//! the cluster size `N`: like `N` (strong), unbounded but `o(N)`
//! (semi-strong), or bounded (weak).

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{top_eigenvalue, Matrix, PsdFactor};
use crate::{Error, Result};

/// Bounds of the uniform entries of `M` in `Omega = M M'`.
pub const RANDOM_STRONG_LOW: f64 = -5.0;
pub const RANDOM_STRONG_HIGH: f64 = 10.0;

/// Off-diagonal correlation inside the semi-strong block.
pub const SEMISTRONG_CORRELATION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum OmegaSpec {
    /// `M M'` with `M` an `N x N` matrix of iid `Unif[-5, 10]` entries.
    RandomStrong,
    /// `M M' * N / lambda_max(M M')`, so that `lambda_max = N`.
    ScaledStrong,
    /// `(a - b) I + b 1 1'` with `0 < b < a`.
    Equicorrelated { a: f64, b: f64 },
    /// Identity with an equicorrelated block of size `ceil(N^exponent)`.
    SemiStrongBlock { exponent: f64 },
    /// Toeplitz `rho^|i-j|`.
    WeakAr1 { rho: f64 },
    Identity,
    /// No error at all; responses are exactly `X beta`.
    Zero,
}

impl OmegaSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OmegaSpec::Equicorrelated { a, b } if !(0.0 < b && b < a && a.is_finite()) => {
                Err(Error::InvalidSpec(alloc::format!(
                    "equicorrelated covariance needs 0 < b < a < inf, got a={a}, b={b}"
                )))
            }
            OmegaSpec::SemiStrongBlock { exponent } if !(exponent > 0.0 && exponent < 1.0) => {
                Err(Error::DomainError(alloc::format!("semi-strong exponent {exponent} outside (0, 1)")))
            }
            OmegaSpec::WeakAr1 { rho } if !(libm::fabs(rho) < 1.0) => {
                Err(Error::DomainError(alloc::format!("AR(1) coefficient {rho} outside (-1, 1)")))
            }
            _ => Ok(()),
        }
    }

    /// Builds an `n x n` covariance. Random kinds consume `rng`.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Matrix> {
        self.validate()?;
        Ok(match *self {
            OmegaSpec::RandomStrong => omega_random_strong(n, rng),
            OmegaSpec::ScaledStrong => omega_scaled(n, rng)?,
            OmegaSpec::Equicorrelated { a, b } => omega_equicorrelated(n, a, b)?,
            OmegaSpec::SemiStrongBlock { exponent } => omega_semistrong(n, exponent)?,
            OmegaSpec::WeakAr1 { rho } => omega_weak_ar1(n, rho)?,
            OmegaSpec::Identity => Matrix::identity(n),
            OmegaSpec::Zero => Matrix::zeros(n, n),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            OmegaSpec::RandomStrong => "random_strong",
            OmegaSpec::ScaledStrong => "scaled_strong",
            OmegaSpec::Equicorrelated { .. } => "equicorrelated",
            OmegaSpec::SemiStrongBlock { .. } => "semi_strong_block",
            OmegaSpec::WeakAr1 { .. } => "weak_ar1",
            OmegaSpec::Identity => "identity",
            OmegaSpec::Zero => "zero",
        }
    }
}

fn uniform_square<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix {
    let data: Vec<f64> = (0..n * n)
        .map(|_| rng.random_range(RANDOM_STRONG_LOW..=RANDOM_STRONG_HIGH))
        .collect();
    Matrix::from_row_major(n, n, data).expect("n*n entries")
}

/// `M M'` with iid `Unif[-5, 10]` entries in `M`.
///
/// Because the entries have non-zero mean, `lambda_max` grows like `N^2`
/// rather than `N`; the matrix is strongly dependent either way.
pub fn omega_random_strong<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix {
    uniform_square(n, rng).outer_gram()
}

/// `M M'` rescaled so that its largest eigenvalue is exactly `N`.
pub fn omega_scaled<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Matrix> {
    let raw = omega_random_strong(n, rng);
    let lambda = top_eigenvalue(&raw)?;
    if !(lambda > 0.0) {
        return Err(Error::SingularMatrix);
    }
    Ok(raw.scaled(n as f64 / lambda))
}

pub fn omega_equicorrelated(n: usize, a: f64, b: f64) -> Result<Matrix> {
    OmegaSpec::Equicorrelated { a, b }.validate()?;
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = if i == j { a } else { b };
        }
    }
    Ok(m)
}

/// `1' Omega 1 / N^2` for the equicorrelated matrix: `(a - b)/N + b`.
pub fn equicorrelated_mean_variance(n: usize, a: f64, b: f64) -> f64 {
    (a - b) / n as f64 + b
}

/// Identity plus correlation 0.9 among the first `ceil(N^q)` members, so
/// `lambda_max = 1 + 0.9 (ceil(N^q) - 1)`.
pub fn omega_semistrong(n: usize, exponent: f64) -> Result<Matrix> {
    OmegaSpec::SemiStrongBlock { exponent }.validate()?;
    let block = (libm::ceil(libm::pow(n as f64, exponent)) as usize).min(n);
    let mut m = Matrix::identity(n);
    for i in 0..block {
        for j in 0..block {
            if i != j {
                m[(i, j)] = SEMISTRONG_CORRELATION;
            }
        }
    }
    Ok(m)
}

pub fn omega_weak_ar1(n: usize, rho: f64) -> Result<Matrix> {
    OmegaSpec::WeakAr1 { rho }.validate()?;
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let lag = i.abs_diff(j) as i32;
            m[(i, j)] = if lag == 0 { 1.0 } else { libm::pow(rho, lag as f64) };
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DependenceLabel {
    Strong,
    SemiStrong,
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DependenceClass {
    pub label: DependenceLabel,
    pub lambda_max: f64,
}

/// `lambda_max / mean(diag)` at or below this is weak dependence.
pub const WEAK_RATIO_CEILING: f64 = 20.0;
/// `lambda_max / trace` at or above this is strong dependence.
pub const STRONG_TRACE_SHARE: f64 = 0.1;

/// Single-matrix heuristic for the dependence class.
///
/// With `r = lambda_max / mean(diag)`, the matrix is strong when `r >= 0.1 N`
/// (the top eigenvalue carries at least a tenth of the trace), weak when
/// `r <= 20`, and semi-strong otherwise. Diagnostic only; the estimators
/// never consult it.
pub fn classify_dependence(omega: &Matrix) -> Result<DependenceClass> {
    if !omega.is_square() || omega.rows() == 0 {
        return Err(Error::DimensionMismatch("classify_dependence needs a non-empty square matrix".into()));
    }
    let n = omega.rows() as f64;
    let lambda_max = top_eigenvalue(omega)?;
    let mean_diag = omega.trace() / n;
    let ratio = if mean_diag > 0.0 { lambda_max / mean_diag } else { 0.0 };
    let label = if ratio >= STRONG_TRACE_SHARE * n {
        DependenceLabel::Strong
    } else if ratio <= WEAK_RATIO_CEILING {
        DependenceLabel::Weak
    } else {
        DependenceLabel::SemiStrong
    };
    Ok(DependenceClass { label, lambda_max })
}

/// Zero-mean multivariate normal sampler with a cached PSD square root.
#[derive(Debug, Clone)]
pub struct MvnSampler {
    factor: PsdFactor,
}

impl MvnSampler {
    pub fn new(omega: &Matrix) -> Result<Self> {
        Ok(Self {
            factor: PsdFactor::new(omega)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    /// Writes `F z` into `out`, `z` iid standard normal.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let f = self.factor.factor();
        let z: Vec<f64> = (0..f.cols()).map(|_| rng.sample(StandardNormal)).collect();
        for (i, o) in out.iter_mut().enumerate() {
            *o = crate::linalg::dot(f.row(i), &z);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }
}

/// One draw from `N(mean, omega)`.
pub fn sample_mvn<R: Rng + ?Sized>(mean: &[f64], omega: &Matrix, rng: &mut R) -> Result<Vec<f64>> {
    if omega.rows() != mean.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "mean of length {} for a {}x{} covariance",
            mean.len(),
            omega.rows(),
            omega.cols()
        )));
    }
    let sampler = MvnSampler::new(omega)?;
    let mut draw = sampler.sample(rng);
    for (d, m) in draw.iter_mut().zip(mean) {
        *d += m;
    }
    Ok(draw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{symmetric_eigenvalues, top_eigenpair};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_random_strong_is_a_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let o = omega_random_strong(1, &mut rng);
            assert!((0.0..=100.0).contains(&o[(0, 0)]));
        }
    }

    #[test]
    fn generated_matrices_are_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let specs = [
            OmegaSpec::RandomStrong,
            OmegaSpec::ScaledStrong,
            OmegaSpec::Equicorrelated { a: 2.0, b: 1.0 },
            OmegaSpec::SemiStrongBlock { exponent: 0.5 },
            OmegaSpec::WeakAr1 { rho: -0.7 },
            OmegaSpec::Identity,
        ];
        for spec in specs {
            for n in [1, 4, 17] {
                let o = spec.generate(n, &mut rng).unwrap();
                assert!(o.is_symmetric(1e-12), "{spec:?}");
                let eig = symmetric_eigenvalues(&o).unwrap();
                assert!(eig[0] >= -1e-8 * o.max_abs(), "{spec:?} n={n}: {}", eig[0]);
            }
        }
    }

    #[test]
    fn mean_diagonal_of_random_strong() {
        // E[u^2] over Unif[-5, 10] is (10^3 + 5^3) / (3 * 15) = 25.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 50;
        let mut total = 0.0;
        for _ in 0..200 {
            total += omega_random_strong(n, &mut rng).trace() / n as f64;
        }
        let mean = total / 200.0;
        assert!((mean - 1250.0).abs() < 0.05 * 1250.0, "{mean}");
    }

    #[test]
    fn scaled_has_top_eigenvalue_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [1, 5, 30, 120] {
            let o = omega_scaled(n, &mut rng).unwrap();
            let top = top_eigenpair(&o).unwrap().value;
            assert!((top / n as f64 - 1.0).abs() < 1e-6, "n={n}: {top}");
            assert!(o.trace() <= (n * n) as f64 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn equicorrelated_closed_forms() {
        let o = omega_equicorrelated(10, 2.0, 1.0).unwrap();
        let quad = o.as_slice().iter().sum::<f64>() / 100.0;
        assert_relative_eq!(quad, equicorrelated_mean_variance(10, 2.0, 1.0), epsilon = 1e-15);
        assert_relative_eq!(top_eigenpair(&o).unwrap().value, 11.0, epsilon = 1e-9);
        assert_eq!(omega_equicorrelated(1, 3.0, 1.0).unwrap()[(0, 0)], 3.0);
        assert!(omega_equicorrelated(3, 1.0, 1.0).is_err());
        assert!(omega_equicorrelated(3, 1.0, 0.0).is_err());
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(omega_semistrong(5, 1.0), Err(Error::DomainError(_))));
        assert!(matches!(omega_semistrong(5, 0.0), Err(Error::DomainError(_))));
        assert!(matches!(omega_weak_ar1(5, 1.0), Err(Error::DomainError(_))));
        assert_eq!(omega_weak_ar1(4, 0.0).unwrap(), Matrix::identity(4));
    }

    #[test]
    fn classifier_examples() {
        assert_eq!(classify_dependence(&Matrix::identity(50)).unwrap().label, DependenceLabel::Weak);
        let eq = omega_equicorrelated(100, 2.0, 1.0).unwrap();
        let c = classify_dependence(&eq).unwrap();
        assert_eq!(c.label, DependenceLabel::Strong);
        assert_relative_eq!(c.lambda_max, 101.0, max_relative = 1e-9);
        let ar = omega_weak_ar1(1000, 0.9).unwrap();
        assert_eq!(classify_dependence(&ar).unwrap().label, DependenceLabel::Weak);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rs = omega_random_strong(60, &mut rng);
        assert_eq!(classify_dependence(&rs).unwrap().label, DependenceLabel::Strong);
        let ss = omega_semistrong(2500, 0.5).unwrap();
        assert_eq!(classify_dependence(&ss).unwrap().label, DependenceLabel::SemiStrong);
    }

    #[test]
    fn zero_covariance_returns_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mean = [1.0, -2.0, 3.5];
        let draw = sample_mvn(&mean, &Matrix::zeros(3, 3), &mut rng).unwrap();
        assert_eq!(draw, mean.to_vec());
    }

    #[test]
    fn identity_sample_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sampler = MvnSampler::new(&Matrix::identity(3)).unwrap();
        let reps = 100_000;
        let mut cov = Matrix::zeros(3, 3);
        for _ in 0..reps {
            cov.add_outer(&sampler.sample(&mut rng), 1.0 / reps as f64);
        }
        let err = cov.sub(&Matrix::identity(3)).unwrap().max_abs();
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn equicorrelated_coordinate_mean_variance() {
        let (n, a, b) = (8, 3.0, 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sampler = MvnSampler::new(&omega_equicorrelated(n, a, b).unwrap()).unwrap();
        let reps = 100_000;
        let means: Vec<f64> = (0..reps)
            .map(|_| sampler.sample(&mut rng).iter().sum::<f64>() / n as f64)
            .collect();
        let m = means.iter().sum::<f64>() / reps as f64;
        let var = means.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (reps - 1) as f64;
        let target = equicorrelated_mean_variance(n, a, b);
        // Standard error of a sample variance of normals: target * sqrt(2/(R-1)).
        let se = target * (2.0 / (reps - 1) as f64).sqrt();
        assert!((var - target).abs() < 3.0 * se, "{var} vs {target}");
    }

    #[test]
    fn generation_is_deterministic() {
        let a = omega_scaled(20, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = omega_scaled(20, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }
}
