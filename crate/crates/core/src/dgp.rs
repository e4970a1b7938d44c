//! Simulation designs: nearly balanced clusters, one dominating cluster, and
//! classical measurement error in the regressors.
//!
//! A [`Design`] fixes the regressors and the within-cluster covariances once;
//! responses (and measurement errors, when enabled) are redrawn for each
//! replication.

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::covgen::{MvnSampler, OmegaSpec};
use crate::data::{build_dataset, ClusterBlock, ClusteredDataset};
use crate::linalg::{dot, lu_solve, top_eigenpair, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum DesignKind {
    Balanced,
    /// Cluster 1 has `large_size` members; the rest follow `size_range`.
    UnbalancedOneLarge { large_size: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub clusters: usize,
    /// Inclusive range of cluster sizes (of clusters 2..G when unbalanced).
    pub size_range: (usize, usize),
    /// Number of non-intercept regressors.
    pub slopes: usize,
    /// Range of the per-cluster regressor mean `mu_g`.
    pub mu_range: (f64, f64),
    /// Range of the per-cluster regressor variance `omega_g^2`.
    pub var_range: (f64, f64),
    /// Range of the scale `c_1j` applied to the large cluster's regressor.
    pub large_scale_range: (f64, f64),
}

impl DesignSpec {
    /// Sizes in `{25, ..., 50}`, `mu_g ~ U(10, 100)`, `omega_g^2 ~ U(200, 300)`.
    pub fn balanced(clusters: usize) -> Self {
        Self {
            kind: DesignKind::Balanced,
            clusters,
            size_range: (25, 50),
            slopes: 1,
            mu_range: (10.0, 100.0),
            var_range: (200.0, 300.0),
            large_scale_range: (2.0, 10.0),
        }
    }

    /// Cluster 1 of size `large_size`, the rest sized in `{4, ..., 10}`.
    pub fn unbalanced(clusters: usize, large_size: usize) -> Self {
        Self {
            kind: DesignKind::UnbalancedOneLarge { large_size },
            size_range: (4, 10),
            ..Self::balanced(clusters)
        }
    }

    pub fn n_params(&self) -> usize {
        self.slopes + 1
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Err(Error::InvalidSpec(msg.to_string()));
        if self.clusters == 0 {
            return invalid("design needs at least one cluster");
        }
        let (lo, hi) = self.size_range;
        if lo == 0 || lo > hi {
            return invalid("size_range must satisfy 1 <= min <= max");
        }
        if let DesignKind::UnbalancedOneLarge { large_size } = self.kind {
            if large_size == 0 {
                return invalid("large cluster must be non-empty");
            }
        }
        let ordered = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1;
        if !ordered(self.mu_range) || !ordered(self.large_scale_range) {
            return invalid("ranges must be finite with min <= max");
        }
        if !ordered(self.var_range) || self.var_range.0 < 0.0 {
            return invalid("var_range must be non-negative with min <= max");
        }
        Ok(())
    }
}

/// Fixed regressors and within-cluster covariances for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub x: Vec<Matrix>,
    pub omegas: Vec<Matrix>,
    /// Top eigenvector of the large cluster's covariance, when there is one.
    pub large_eigenvector: Option<Vec<f64>>,
}

impl Design {
    pub fn n_clusters(&self) -> usize {
        self.x.len()
    }

    pub fn n_params(&self) -> usize {
        self.x.first().map_or(0, Matrix::cols)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.x.iter().map(Matrix::rows).collect()
    }

    pub fn x_refs(&self) -> Vec<&Matrix> {
        self.x.iter().collect()
    }

    pub fn stacked_x(&self) -> Matrix {
        stack(&self.x)
    }

    pub fn error_samplers(&self) -> Result<Vec<MvnSampler>> {
        self.omegas.iter().map(MvnSampler::new).collect()
    }
}

pub fn stack(blocks: &[Matrix]) -> Matrix {
    let k = blocks.first().map_or(0, Matrix::cols);
    let mut data = Vec::new();
    for b in blocks {
        data.extend_from_slice(b.as_slice());
    }
    let n = blocks.iter().map(Matrix::rows).sum();
    Matrix::from_row_major(n, k, data).expect("blocks share k")
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// `[1 | N(mu_j, omega_j^2) ...]` with `mu_j`, `omega_j^2` drawn per cluster.
fn regular_block<R: Rng + ?Sized>(spec: &DesignSpec, n: usize, rng: &mut R) -> Matrix {
    let params: Vec<(f64, f64)> = (0..spec.slopes)
        .map(|_| {
            let mu = uniform(rng, spec.mu_range);
            let var = uniform(rng, spec.var_range);
            (mu, libm::sqrt(var))
        })
        .collect();
    let k = spec.n_params();
    let mut x = Matrix::zeros(n, k);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for (j, &(mu, sd)) in params.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, j + 1)] = mu + sd * z;
        }
    }
    x
}

fn regular_clusters<R: Rng + ?Sized>(
    spec: &DesignSpec,
    omega: &OmegaSpec,
    count: usize,
    rng: &mut R,
    design: &mut Design,
) -> Result<()> {
    let (lo, hi) = spec.size_range;
    for _ in 0..count {
        let n = rng.random_range(lo..=hi);
        let x = regular_block(spec, n, rng);
        let o = omega.generate(n, rng)?;
        design.x.push(x);
        design.omegas.push(o);
    }
    Ok(())
}

/// Every cluster has `N_g ~ U{size_range}` and regressors `[1 | N(mu_g, omega_g^2)]`.
pub fn gen_balanced_design<R: Rng + ?Sized>(spec: &DesignSpec, omega: &OmegaSpec, rng: &mut R) -> Result<Design> {
    spec.validate()?;
    omega.validate()?;
    if spec.kind != DesignKind::Balanced {
        return Err(Error::InvalidSpec("gen_balanced_design needs a balanced spec".into()));
    }
    let mut design = Design {
        x: Vec::with_capacity(spec.clusters),
        omegas: Vec::with_capacity(spec.clusters),
        large_eigenvector: None,
    };
    regular_clusters(spec, omega, spec.clusters, rng, &mut design)?;
    Ok(design)
}

/// `sgn` with `sgn(0) = +1`.
pub fn sign_no_zero(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Cluster 1 gets `Omega_1` first, then regressors `c_1j * sgn(p_1j)` where
/// `p_1` is the top eigenvector of `Omega_1` and `c_1j ~ U(2, 10)`. The other
/// clusters follow the balanced recipe with their own size range.
pub fn gen_unbalanced_design<R: Rng + ?Sized>(spec: &DesignSpec, omega: &OmegaSpec, rng: &mut R) -> Result<Design> {
    spec.validate()?;
    omega.validate()?;
    let DesignKind::UnbalancedOneLarge { large_size } = spec.kind else {
        return Err(Error::InvalidSpec("gen_unbalanced_design needs an unbalanced spec".into()));
    };
    let omega1 = omega.generate(large_size, rng)?;
    let top = top_eigenpair(&omega1)?;
    let signs: Vec<f64> = top.vector.iter().map(|&v| sign_no_zero(v)).collect();
    let mut x1 = Matrix::zeros(large_size, spec.n_params());
    for i in 0..large_size {
        x1[(i, 0)] = 1.0;
    }
    for j in 1..=spec.slopes {
        for (i, s) in signs.iter().enumerate() {
            x1[(i, j)] = uniform(rng, spec.large_scale_range) * s;
        }
    }

    let mut design = Design {
        x: Vec::with_capacity(spec.clusters),
        omegas: Vec::with_capacity(spec.clusters),
        large_eigenvector: Some(top.vector),
    };
    design.x.push(x1);
    design.omegas.push(omega1);
    regular_clusters(spec, omega, spec.clusters - 1, rng, &mut design)?;
    Ok(design)
}

pub fn gen_design<R: Rng + ?Sized>(spec: &DesignSpec, omega: &OmegaSpec, rng: &mut R) -> Result<Design> {
    match spec.kind {
        DesignKind::Balanced => gen_balanced_design(spec, omega, rng),
        DesignKind::UnbalancedOneLarge { .. } => gen_unbalanced_design(spec, omega, rng),
    }
}

/// One error vector per cluster, independent across clusters.
pub fn draw_errors<R: Rng + ?Sized>(samplers: &[MvnSampler], rng: &mut R) -> Vec<Vec<f64>> {
    samplers.iter().map(|s| s.sample(rng)).collect()
}

/// `X_g beta + eps_g` per cluster.
pub fn responses(x: &[Matrix], beta: &[f64], errors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter()
        .zip(errors)
        .map(|(xg, eg)| (0..xg.rows()).map(|i| dot(xg.row(i), beta) + eg[i]).collect())
        .collect()
}

/// Draws `Y_g = X_g beta + MVN(0, Omega_g)` for every cluster of `design`.
pub fn gen_response<R: Rng + ?Sized>(
    design: &Design,
    beta: &[f64],
    samplers: &[MvnSampler],
    rng: &mut R,
) -> Result<ClusteredDataset> {
    if beta.len() != design.n_params() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "beta has {} entries for {} regressors",
            beta.len(),
            design.n_params()
        )));
    }
    if samplers.len() != design.n_clusters() {
        return Err(Error::DimensionMismatch("one sampler per cluster required".into()));
    }
    let errors = draw_errors(samplers, rng);
    let ys = responses(&design.x, beta, &errors);
    build_dataset(
        design
            .x
            .iter()
            .zip(ys)
            .enumerate()
            .map(|(g, (x, y))| ClusterBlock::new(alloc::format!("{}", g + 1), x.clone(), y))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// Measurement error on one regressor column: `Lambda_g = scale * Omega(spec)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct MeColumn {
    pub column: usize,
    pub omega: OmegaSpec,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct MeasurementErrorSpec {
    pub columns: Vec<MeColumn>,
}

/// Realised `Lambda_{g,j}` matrices for a fixed design, with samplers.
#[derive(Debug, Clone)]
pub struct MeasurementErrorModel {
    columns: Vec<usize>,
    /// `lambdas[c][g]` for contaminated column `columns[c]` in cluster `g`.
    lambdas: Vec<Vec<Matrix>>,
    samplers: Vec<Vec<MvnSampler>>,
}

impl MeasurementErrorModel {
    pub fn new<R: Rng + ?Sized>(spec: &MeasurementErrorSpec, design: &Design, rng: &mut R) -> Result<Self> {
        let k = design.n_params();
        let mut columns = Vec::with_capacity(spec.columns.len());
        for c in &spec.columns {
            if c.column == 0 || c.column >= k {
                return Err(Error::InvalidSpec(alloc::format!(
                    "measurement error column {} must be a regressor in 1..{k}",
                    c.column
                )));
            }
            if columns.contains(&c.column) {
                return Err(Error::InvalidSpec(alloc::format!("column {} listed twice", c.column)));
            }
            if !(c.scale >= 0.0 && c.scale.is_finite()) {
                return Err(Error::InvalidSpec("measurement error scale must be finite and >= 0".into()));
            }
            c.omega.validate()?;
            columns.push(c.column);
        }
        let mut lambdas = Vec::with_capacity(columns.len());
        let mut samplers = Vec::with_capacity(columns.len());
        for c in &spec.columns {
            let per_cluster: Vec<Matrix> = design
                .x
                .iter()
                .map(|x| c.omega.generate(x.rows(), rng).map(|o| o.scaled(c.scale)))
                .collect::<Result<_>>()?;
            samplers.push(per_cluster.iter().map(MvnSampler::new).collect::<Result<Vec<_>>>()?);
            lambdas.push(per_cluster);
        }
        Ok(Self {
            columns,
            lambdas,
            samplers,
        })
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn lambdas(&self, column_index: usize) -> &[Matrix] {
        &self.lambdas[column_index]
    }

    /// Observed regressors `X* + Gamma`, columns of `Gamma` independent.
    pub fn inject<R: Rng + ?Sized>(&self, truth: &[Matrix], rng: &mut R) -> Vec<Matrix> {
        let mut observed: Vec<Matrix> = truth.to_vec();
        for (c, &col) in self.columns.iter().enumerate() {
            for (g, x) in observed.iter_mut().enumerate() {
                let gamma = self.samplers[c][g].sample(rng);
                for (i, e) in gamma.iter().enumerate() {
                    x[(i, col)] += e;
                }
            }
        }
        observed
    }

    /// Finite-sample `Q0* = sum X*'X* / n` and `C0 = diag(sum_g tr Lambda_{g,j} / n)`.
    pub fn oracle_inputs(&self, truth: &[Matrix]) -> (Matrix, Matrix) {
        let k = truth.first().map_or(0, Matrix::cols);
        let n: usize = truth.iter().map(Matrix::rows).sum();
        let mut q = Matrix::zeros(k, k);
        for x in truth {
            q = q.add(&x.gram()).expect("same k");
        }
        let q = q.scaled(1.0 / n as f64);
        let mut c = Matrix::zeros(k, k);
        for (ci, &col) in self.columns.iter().enumerate() {
            let tr: f64 = self.lambdas[ci].iter().map(Matrix::trace).sum();
            c[(col, col)] = tr / n as f64;
        }
        (q, c)
    }
}

/// Contaminated regressors alongside the truth they were derived from.
#[derive(Debug, Clone)]
pub struct ContaminatedDesign {
    pub observed: Vec<Matrix>,
}

pub fn inject_measurement_error<R: Rng + ?Sized>(
    design: &Design,
    model: &MeasurementErrorModel,
    rng: &mut R,
) -> ContaminatedDesign {
    ContaminatedDesign {
        observed: model.inject(&design.x, rng),
    }
}

/// Probability limit of pooled OLS under classical measurement error:
/// `beta - (Q0* + C0)^{-1} C0 beta`.
pub fn plim_pols_me_oracle(q0: &Matrix, c0: &Matrix, beta: &[f64]) -> Result<Vec<f64>> {
    let k = beta.len();
    for m in [q0, c0] {
        if m.rows() != k || m.cols() != k {
            return Err(Error::DimensionMismatch("Q0 and C0 must be k x k".into()));
        }
    }
    for i in 0..k {
        for j in 0..k {
            if i != j && c0[(i, j)] != 0.0 {
                return Err(Error::InvalidSpec("C0 must be diagonal".into()));
            }
        }
        if c0[(i, i)] < 0.0 {
            return Err(Error::InvalidSpec("C0 must be non-negative".into()));
        }
    }
    let c_beta = c0.matvec(beta)?;
    let shift = lu_solve(&q0.add(c0)?, &c_beta)?;
    Ok(beta.iter().zip(&shift).map(|(b, s)| b - s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covgen::{equicorrelated_mean_variance, omega_equicorrelated};
    use alloc::vec;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn balanced_design_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = gen_balanced_design(&DesignSpec::balanced(40), &OmegaSpec::Identity, &mut rng).unwrap();
        assert_eq!(d.n_clusters(), 40);
        for x in &d.x {
            assert!((25..=50).contains(&x.rows()));
            assert!((0..x.rows()).all(|i| x[(i, 0)] == 1.0));
        }
        for (x, o) in d.x.iter().zip(&d.omegas) {
            assert_eq!(o.rows(), x.rows());
        }
    }

    #[test]
    fn cluster_means_follow_uniform_mu() {
        // With var_range at zero the regressor equals mu_g exactly.
        let mut spec = DesignSpec::balanced(10_000);
        spec.size_range = (1, 1);
        spec.var_range = (0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = gen_balanced_design(&spec, &OmegaSpec::Identity, &mut rng).unwrap();
        let mean = d.x.iter().map(|x| x[(0, 1)]).sum::<f64>() / 10_000.0;
        assert!((mean - 55.0).abs() < 1.0, "{mean}");
    }

    #[test]
    fn unbalanced_large_cluster_follows_eigenvector_signs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = DesignSpec::unbalanced(6, 40);
        let d = gen_unbalanced_design(&spec, &OmegaSpec::RandomStrong, &mut rng).unwrap();
        assert_eq!(d.x[0].rows(), 40);
        let p = d.large_eigenvector.as_ref().unwrap();
        for i in 0..40 {
            let v = d.x[0][(i, 1)];
            assert!((2.0..=10.0).contains(&v.abs()));
            assert_eq!(v.signum(), sign_no_zero(p[i]));
        }
        for x in &d.x[1..] {
            assert!((4..=10).contains(&x.rows()));
        }
    }

    #[test]
    fn sign_ties_map_to_plus_one() {
        assert_eq!(sign_no_zero(0.0), 1.0);
        assert_eq!(sign_no_zero(-0.0), 1.0);
        assert_eq!(sign_no_zero(-1e-300), -1.0);
    }

    #[test]
    fn zero_covariance_response_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut d = gen_balanced_design(&DesignSpec::balanced(3), &OmegaSpec::Identity, &mut rng).unwrap();
        d.omegas = d.omegas.iter().map(|o| Matrix::zeros(o.rows(), o.cols())).collect();
        let samplers = d.error_samplers().unwrap();
        let ds = gen_response(&d, &[1.0, 0.0], &samplers, &mut rng).unwrap();
        assert!(ds.stacked_y().iter().all(|&y| y == 1.0));
        assert!(gen_response(&d, &[1.0], &samplers, &mut rng).is_err());
    }

    #[test]
    fn response_mean_converges_to_x_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut spec = DesignSpec::balanced(2);
        spec.size_range = (3, 3);
        let d = gen_balanced_design(&spec, &OmegaSpec::Equicorrelated { a: 2.0, b: 1.0 }, &mut rng).unwrap();
        let samplers = d.error_samplers().unwrap();
        let beta = [1.0, 0.08];
        let reps = 10_000;
        let mut sums = vec![0.0; 6];
        for _ in 0..reps {
            let ds = gen_response(&d, &beta, &samplers, &mut rng).unwrap();
            for (s, y) in sums.iter_mut().zip(ds.stacked_y()) {
                *s += y;
            }
        }
        let x = d.stacked_x();
        for (i, s) in sums.iter().enumerate() {
            let target = dot(x.row(i), &beta);
            // Marginal variance is a = 2.
            let se = (2.0 / reps as f64).sqrt();
            assert!((s / reps as f64 - target).abs() < 4.0 * se);
        }
    }

    #[test]
    fn measurement_error_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut spec = DesignSpec::balanced(400);
        spec.size_range = (25, 25);
        let d = gen_balanced_design(&spec, &OmegaSpec::Identity, &mut rng).unwrap();

        let zero = MeasurementErrorSpec {
            columns: vec![MeColumn { column: 1, omega: OmegaSpec::Identity, scale: 0.0 }],
        };
        let model = MeasurementErrorModel::new(&zero, &d, &mut rng).unwrap();
        assert_eq!(inject_measurement_error(&d, &model, &mut rng).observed, d.x);

        let weak = MeasurementErrorSpec {
            columns: vec![MeColumn { column: 1, omega: OmegaSpec::Identity, scale: 4.0 }],
        };
        let model = MeasurementErrorModel::new(&weak, &d, &mut rng).unwrap();
        let obs = inject_measurement_error(&d, &model, &mut rng).observed;
        let gammas: Vec<f64> = obs
            .iter()
            .zip(&d.x)
            .flat_map(|(o, x)| (0..x.rows()).map(move |i| o[(i, 1)] - x[(i, 1)]))
            .collect();
        assert_eq!(gammas.len(), 10_000);
        let var = gammas.iter().map(|g| g * g).sum::<f64>() / gammas.len() as f64;
        assert!((var - 4.0).abs() < 0.05 * 4.0, "{var}");
        assert!(obs.iter().zip(&d.x).all(|(o, x)| (0..x.rows()).all(|i| o[(i, 0)] == 1.0)));

        let strong = MeasurementErrorSpec {
            columns: vec![MeColumn { column: 1, omega: OmegaSpec::Equicorrelated { a: 2.0, b: 1.0 }, scale: 1.0 }],
        };
        let model = MeasurementErrorModel::new(&strong, &d, &mut rng).unwrap();
        let reps = 20;
        let mut bars = Vec::new();
        for _ in 0..reps {
            let obs = inject_measurement_error(&d, &model, &mut rng).observed;
            for (o, x) in obs.iter().zip(&d.x) {
                bars.push((0..25).map(|i| o[(i, 1)] - x[(i, 1)]).sum::<f64>() / 25.0);
            }
        }
        let var = bars.iter().map(|g| g * g).sum::<f64>() / bars.len() as f64;
        let target = equicorrelated_mean_variance(25, 2.0, 1.0);
        let se = target * (2.0 / bars.len() as f64).sqrt();
        assert!((var - target).abs() < 4.0 * se, "{var} vs {target}");
    }

    #[test]
    fn measurement_error_spec_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = gen_balanced_design(&DesignSpec::balanced(3), &OmegaSpec::Identity, &mut rng).unwrap();
        let on_intercept = MeasurementErrorSpec {
            columns: vec![MeColumn { column: 0, omega: OmegaSpec::Identity, scale: 1.0 }],
        };
        assert!(MeasurementErrorModel::new(&on_intercept, &d, &mut rng).is_err());
        let bad = MeasurementErrorSpec {
            columns: vec![MeColumn { column: 1, omega: OmegaSpec::WeakAr1 { rho: 2.0 }, scale: 1.0 }],
        };
        assert!(MeasurementErrorModel::new(&bad, &d, &mut rng).is_err());
    }

    #[test]
    fn plim_oracle_cases() {
        let q = Matrix::identity(2);
        let zero = Matrix::zeros(2, 2);
        assert_eq!(plim_pols_me_oracle(&q, &zero, &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);

        let one = Matrix::from_rows(&[[1.0]]).unwrap();
        assert_relative_eq!(plim_pols_me_oracle(&one, &one, &[1.0]).unwrap()[0], 0.5, epsilon = 1e-15);

        let q = Matrix::from_diagonal(&[2.0, 3.0]);
        let c = Matrix::from_diagonal(&[1e6, 1e6]);
        let p = plim_pols_me_oracle(&q, &c, &[1.0, -4.0]).unwrap();
        assert!(p[0].abs() < 1e-5 && p[1].abs() < 1e-4);

        let not_diag = Matrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap();
        assert!(plim_pols_me_oracle(&q, &not_diag, &[1.0, 1.0]).is_err());
        let neg = Matrix::from_diagonal(&[-2.0, 0.0]);
        assert!(plim_pols_me_oracle(&Matrix::from_diagonal(&[2.0, 0.0]), &neg, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn equicorrelated_helper_matches_matrix() {
        let o = omega_equicorrelated(7, 5.0, 2.0).unwrap();
        let q = o.as_slice().iter().sum::<f64>() / 49.0;
        assert_relative_eq!(q, equicorrelated_mean_variance(7, 5.0, 2.0), epsilon = 1e-14);
    }

    #[test]
    fn designs_are_reproducible() {
        let spec = DesignSpec::unbalanced(5, 30);
        let a = gen_design(&spec, &OmegaSpec::ScaledStrong, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = gen_design(&spec, &OmegaSpec::ScaledStrong, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
    }
}
