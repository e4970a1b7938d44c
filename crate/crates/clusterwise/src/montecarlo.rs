//! Replication engine for size, power, MSE, efficiency, measurement-error and
//! variance-calibration studies.
//!
//! Replication `z` draws from its own ChaCha stream `(seed, z)`, results are
//! collected in index order and aggregated sequentially, so a report depends
//! on `(scenario, R, seed)` only and never on the worker count.

use clusterwise_core::covgen::{MvnSampler, OmegaSpec};
use clusterwise_core::data::{balance_of_sizes, mean};
use clusterwise_core::dgp::{
    draw_errors, gen_design, plim_pols_me_oracle, responses, stack, Design, DesignKind, MeasurementErrorModel,
};
use clusterwise_core::distributions::chi2_quantile;
use clusterwise_core::estimators::{
    true_variance_averaged, true_variance_pooled, AveragedDesign, EstimatorKind, FitOptions, FitResult,
    PooledDesign,
};
use clusterwise_core::inference::{wald_statistic, LinearHypothesis};
use clusterwise_core::numeric::CompensatedSum;
use clusterwise_core::{Error as CoreError, Matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::scenarios::Scenario;

/// Estimators in report order: the averaged estimator first.
pub const ESTIMATORS: [EstimatorKind; 2] = [EstimatorKind::Averaged, EstimatorKind::Pooled];

/// Stream of the fixed design; replications use streams `0..R`.
pub const DESIGN_STREAM: u64 = u64::MAX;
/// Stream of the measurement-error covariances.
pub const ME_STREAM: u64 = u64::MAX - 1;

/// A scenario aborts when more than this share of replications fail.
pub const MAX_FAILURE_SHARE: f64 = 0.001;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub scenario: Scenario,
    pub replications: usize,
    pub seed: u64,
    /// Worker threads; `0` lets rayon decide. Never affects results.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub df_correction: bool,
}

impl McConfig {
    pub fn new(scenario: Scenario, replications: usize, seed: u64) -> Self {
        Self {
            scenario,
            replications,
            seed,
            workers: 0,
            df_correction: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(AppError::Config("replications must be at least 1".into()));
        }
        self.scenario.validate()
    }
}

/// Fixed part of a scenario, shared read-only by all replications.
struct Prepared {
    design: Design,
    samplers: Vec<MvnSampler>,
    sizes: Vec<usize>,
    pooled: Option<PooledDesign>,
    averaged: Option<AveragedDesign>,
    me: Option<MeasurementErrorModel>,
    hypothesis: LinearHypothesis,
    /// Exact covariances `[averaged, pooled]` when the design is fixed.
    true_cov: Option<[Matrix; 2]>,
    opts: FitOptions,
}

fn prepare(cfg: &McConfig) -> Result<Prepared> {
    let s = &cfg.scenario;
    let design = gen_design(&s.design, &s.omega, &mut stream_rng(cfg.seed, DESIGN_STREAM))?;
    let samplers = design.error_samplers()?;
    let sizes = design.sizes();
    let hypothesis = s.hypothesis.build()?;
    let me = match &s.measurement_error {
        Some(spec) => Some(MeasurementErrorModel::new(spec, &design, &mut stream_rng(cfg.seed, ME_STREAM))?),
        None => None,
    };
    let (pooled, averaged, true_cov) = if me.is_none() {
        let refs = design.x_refs();
        let pooled = PooledDesign::new(design.stacked_x(), &sizes)?;
        let averaged = AveragedDesign::from_blocks(&refs)?;
        let true_cov = [
            true_variance_averaged(&refs, &design.omegas)?,
            true_variance_pooled(&refs, &design.omegas)?,
        ];
        (Some(pooled), Some(averaged), Some(true_cov))
    } else {
        (None, None, None)
    };
    Ok(Prepared {
        design,
        samplers,
        sizes,
        pooled,
        averaged,
        me,
        hypothesis,
        true_cov,
        opts: FitOptions {
            df_correction: cfg.df_correction,
        },
    })
}

/// Per-replication output, estimators in [`ESTIMATORS`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationDraw {
    pub beta: [Vec<f64>; 2],
    pub vhat: [Matrix; 2],
    /// `None` when the restricted covariance was singular.
    pub stat_null: [Option<f64>; 2],
    pub stat_alt: [Option<f64>; 2],
    /// Averaged-estimator Wald statistic studentised by the exact variance.
    pub oracle_stat: Option<f64>,
}

fn statistic(beta: &[f64], cov: &Matrix, hyp: &LinearHypothesis) -> std::result::Result<Option<f64>, CoreError> {
    match wald_statistic(beta, cov, hyp) {
        Ok(t) => Ok(Some(t)),
        Err(CoreError::SingularRestrictedCov { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn fit_pair(
    pooled: &PooledDesign,
    averaged: &AveragedDesign,
    y: &[Vec<f64>],
    opts: FitOptions,
) -> std::result::Result<[FitResult; 2], CoreError> {
    let stacked: Vec<f64> = y.iter().flatten().copied().collect();
    let ybar: Vec<f64> = y.iter().map(|v| mean(v)).collect();
    Ok([averaged.fit(&ybar, opts)?, pooled.fit(&stacked, opts)?])
}

fn replicate(p: &Prepared, cfg: &McConfig, z: usize) -> std::result::Result<ReplicationDraw, CoreError> {
    let s = &cfg.scenario;
    let mut rng = stream_rng(cfg.seed, z as u64);
    let errors = draw_errors(&p.samplers, &mut rng);
    let y_null = responses(&p.design.x, &s.beta_null, &errors);
    let y_alt = responses(&p.design.x, &s.beta_alt, &errors);

    let owned;
    let (pooled, averaged) = match (&p.pooled, &p.averaged, &p.me) {
        (Some(pd), Some(ad), _) => (pd, ad),
        (_, _, Some(model)) => {
            let observed = model.inject(&p.design.x, &mut rng);
            let refs: Vec<&Matrix> = observed.iter().collect();
            owned = (PooledDesign::new(stack(&observed), &p.sizes)?, AveragedDesign::from_blocks(&refs)?);
            (&owned.0, &owned.1)
        }
        _ => unreachable!("either a fixed design or a measurement-error model"),
    };

    let null = fit_pair(pooled, averaged, &y_null, p.opts)?;
    let alt = fit_pair(pooled, averaged, &y_alt, p.opts)?;
    let stat_null = [
        statistic(&null[0].beta, &null[0].cov, &p.hypothesis)?,
        statistic(&null[1].beta, &null[1].cov, &p.hypothesis)?,
    ];
    let stat_alt = [
        statistic(&alt[0].beta, &alt[0].cov, &p.hypothesis)?,
        statistic(&alt[1].beta, &alt[1].cov, &p.hypothesis)?,
    ];
    let oracle_stat = match &p.true_cov {
        Some(tc) => statistic(&null[0].beta, &tc[0], &p.hypothesis)?,
        None => None,
    };
    let [a, b] = null;
    Ok(ReplicationDraw {
        beta: [a.beta, b.beta],
        vhat: [a.cov, b.cov],
        stat_null,
        stat_alt,
        oracle_stat,
    })
}

fn run_draws(p: &Prepared, cfg: &McConfig) -> Result<Vec<std::result::Result<ReplicationDraw, CoreError>>> {
    let work = || {
        (0..cfg.replications)
            .into_par_iter()
            .map(|z| replicate(p, cfg, z))
            .collect::<Vec<_>>()
    };
    if cfg.workers == 0 {
        return Ok(work());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| AppError::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    Ok(pool.install(work))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub clusters: usize,
    pub n_obs: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub balance_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub large_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub mean_beta: Vec<f64>,
    /// `mean_beta - beta_null`.
    pub bias: Vec<f64>,
    /// Monte Carlo standard error of each `mean_beta` entry.
    pub bias_mc_se: Vec<f64>,
    /// Componentwise `mean((beta_hat - beta_null)^2)`.
    pub mse: Vec<f64>,
    /// Replications whose restricted covariance was singular under the null.
    pub degenerate_tests: usize,
    pub empirical_size: Option<f64>,
    pub size_mc_se: Option<f64>,
    pub power: Option<f64>,
    pub size_corrected_cv: Option<f64>,
    pub size_corrected_power: Option<f64>,
    pub mean_vhat: Matrix,
    /// Sample covariance of the estimates across replications.
    pub mc_cov: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_cov: Option<Matrix>,
    /// `|mean_vhat - true_cov|_F / |true_cov|_F`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vhat_rel_error: Option<f64>,
    /// `|mc_cov - true_cov|_F / |true_cov|_F`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_cov_rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeOracle {
    pub plim_pols: Vec<f64>,
    /// `plim_pols - beta_null`.
    pub oracle_bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub replications: usize,
    pub failures: usize,
    pub level: f64,
    pub asymptotic_cv: f64,
    pub beta_null: Vec<f64>,
    pub beta_alt: Vec<f64>,
    pub design: DesignSummary,
    pub estimators: Vec<EstimatorSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_error: Option<MeOracle>,
}

impl McReport {
    pub fn estimator(&self, kind: EstimatorKind) -> &EstimatorSummary {
        self.estimators
            .iter()
            .find(|e| e.estimator == kind)
            .expect("both estimators are always reported")
    }
}

/// Report plus the per-replication draws it was aggregated from.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub report: McReport,
    pub draws: Vec<ReplicationDraw>,
}

/// Type-7 sample quantile: linear interpolation between order statistics.
pub fn quantile_type7(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// `sqrt(p (1 - p) / R)`.
pub fn rate_mc_se(p: f64, r: usize) -> f64 {
    (p * (1.0 - p) / r as f64).sqrt()
}

fn share_above(values: &[f64], cv: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().filter(|&&t| t > cv).count() as f64 / values.len() as f64)
}

fn matrix_mean<'a>(ms: impl Iterator<Item = &'a Matrix>, rows: usize, cols: usize) -> Matrix {
    let mut sums = vec![CompensatedSum::new(); rows * cols];
    let mut n = 0usize;
    for m in ms {
        n += 1;
        for (s, v) in sums.iter_mut().zip(m.as_slice()) {
            s.add(*v);
        }
    }
    let data = sums.iter().map(|s| s.value() / n as f64).collect();
    Matrix::from_row_major(rows, cols, data).expect("rows * cols entries")
}

/// `None` when `truth` is zero.
fn relative_frobenius(a: &Matrix, truth: &Matrix) -> Option<f64> {
    let scale = truth.frobenius_norm();
    (scale > 0.0).then(|| a.sub(truth).expect("same shape").frobenius_norm() / scale)
}

fn summarise(
    e: usize,
    draws: &[ReplicationDraw],
    cfg: &McConfig,
    cv: f64,
    true_cov: Option<&Matrix>,
) -> EstimatorSummary {
    let s = &cfg.scenario;
    let k = s.beta_null.len();
    let r = draws.len();
    let mut mean_beta = vec![0.0; k];
    let mut mse = vec![0.0; k];
    for j in 0..k {
        let mut sum = CompensatedSum::new();
        let mut sq = CompensatedSum::new();
        for d in draws {
            let b = d.beta[e][j];
            sum.add(b);
            sq.add((b - s.beta_null[j]).powi(2));
        }
        mean_beta[j] = sum.value() / r as f64;
        mse[j] = sq.value() / r as f64;
    }
    let mut mc_cov = Matrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let mut acc = CompensatedSum::new();
            for d in draws {
                acc.add((d.beta[e][a] - mean_beta[a]) * (d.beta[e][b] - mean_beta[b]));
            }
            mc_cov[(a, b)] = if r > 1 { acc.value() / (r - 1) as f64 } else { 0.0 };
        }
    }
    let bias_mc_se = (0..k).map(|j| (mc_cov[(j, j)] / r as f64).sqrt()).collect();
    let mean_vhat = matrix_mean(draws.iter().map(|d| &d.vhat[e]), k, k);

    let null: Vec<f64> = draws.iter().filter_map(|d| d.stat_null[e]).collect();
    let alt: Vec<f64> = draws.iter().filter_map(|d| d.stat_alt[e]).collect();
    let empirical_size = share_above(&null, cv);
    let size_corrected_cv = quantile_type7(&null, 1.0 - s.level);
    EstimatorSummary {
        estimator: ESTIMATORS[e],
        bias: mean_beta.iter().zip(&s.beta_null).map(|(m, b)| m - b).collect(),
        mean_beta,
        bias_mc_se,
        mse,
        degenerate_tests: r - null.len(),
        size_mc_se: empirical_size.map(|p| rate_mc_se(p, null.len())),
        empirical_size,
        power: share_above(&alt, cv),
        size_corrected_power: size_corrected_cv.and_then(|c| share_above(&alt, c)),
        size_corrected_cv,
        vhat_rel_error: true_cov.and_then(|t| relative_frobenius(&mean_vhat, t)),
        mc_cov_rel_error: true_cov.and_then(|t| relative_frobenius(&mc_cov, t)),
        true_cov: true_cov.cloned(),
        mean_vhat,
        mc_cov,
    }
}

/// Runs every replication of `cfg` and aggregates both estimators.
pub fn simulate(cfg: &McConfig) -> Result<Simulation> {
    cfg.validate()?;
    let p = prepare(cfg)?;
    let results = run_draws(&p, cfg)?;

    let mut first_failure = None;
    let mut draws = Vec::with_capacity(results.len());
    for (z, r) in results.into_iter().enumerate() {
        match r {
            Ok(d) => draws.push(d),
            Err(e) => {
                first_failure.get_or_insert((z, e));
            }
        }
    }
    let failures = cfg.replications - draws.len();
    if failures as f64 > MAX_FAILURE_SHARE * cfg.replications as f64 {
        let (replication, source) = first_failure.expect("failures imply a first failure");
        return Err(AppError::Replication {
            context: format!("{}: {failures} of {} replications failed", cfg.scenario.name, cfg.replications),
            replication,
            source,
        });
    }

    let s = &cfg.scenario;
    let df = p.hypothesis.n_restrictions() as u32;
    let cv = chi2_quantile(1.0 - s.level, df)?;
    let estimators = (0..2)
        .map(|e| summarise(e, &draws, cfg, cv, p.true_cov.as_ref().map(|t| &t[e])))
        .collect();

    let measurement_error = match &p.me {
        Some(model) => {
            let (q0, c0) = model.oracle_inputs(&p.design.x);
            let plim_pols = plim_pols_me_oracle(&q0, &c0, &s.beta_null)?;
            let oracle_bias = plim_pols.iter().zip(&s.beta_null).map(|(a, b)| a - b).collect();
            Some(MeOracle { plim_pols, oracle_bias })
        }
        None => None,
    };

    let balance = balance_of_sizes(&p.sizes);
    let report = McReport {
        scenario: s.name.clone(),
        config_hash: crate::report::config_hash(cfg),
        seed: cfg.seed,
        replications: cfg.replications,
        failures,
        level: s.level,
        asymptotic_cv: cv,
        beta_null: s.beta_null.clone(),
        beta_alt: s.beta_alt.clone(),
        design: DesignSummary {
            clusters: p.sizes.len(),
            n_obs: p.sizes.iter().sum(),
            min_size: balance.min_size,
            max_size: balance.max_size,
            balance_ratio: balance.ratio,
            large_size: match s.design.kind {
                DesignKind::UnbalancedOneLarge { large_size } => Some(large_size),
                DesignKind::Balanced => None,
            },
        },
        estimators,
        measurement_error,
    };
    Ok(Simulation { report, draws })
}

/// Empirical size, power and size-corrected power of both Wald tests.
pub fn run_size_power(cfg: &McConfig) -> Result<McReport> {
    simulate(cfg).map(|s| s.report)
}

/// Componentwise MSE at `beta_null`; reported alongside size and power.
pub fn run_mse(cfg: &McConfig) -> Result<McReport> {
    run_size_power(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub replications: usize,
    /// `Var(pooled) / Var(averaged)` per coefficient, from the Monte Carlo.
    pub variance_ratio: Vec<f64>,
    /// `Var(pooled) / Var(averaged)` per coefficient, from the exact variances.
    pub exact_variance_ratio: Vec<f64>,
    pub regime: String,
}

/// Equicorrelated errors with `b / a` below this share count as nearly
/// independent, where the averaged estimator need not win.
pub const NEGLIGIBLE_CORRELATION: f64 = 0.05;

fn efficiency_regime(omega: &OmegaSpec) -> &'static str {
    match *omega {
        OmegaSpec::Equicorrelated { a, b } if b / a < NEGLIGIBLE_CORRELATION => "near_independent",
        OmegaSpec::Equicorrelated { .. } => "equicorrelated",
        OmegaSpec::Identity => "independent",
        _ => "general",
    }
}

pub fn efficiency_from(report: &McReport, omega: &OmegaSpec) -> EfficiencyReport {
    let a = report.estimator(EstimatorKind::Averaged);
    let p = report.estimator(EstimatorKind::Pooled);
    let k = report.beta_null.len();
    let ratio = |num: &Matrix, den: &Matrix| (0..k).map(|j| num[(j, j)] / den[(j, j)]).collect();
    EfficiencyReport {
        scenario: report.scenario.clone(),
        config_hash: report.config_hash.clone(),
        seed: report.seed,
        replications: report.replications,
        variance_ratio: ratio(&p.mc_cov, &a.mc_cov),
        exact_variance_ratio: match (&p.true_cov, &a.true_cov) {
            (Some(tp), Some(ta)) => ratio(tp, ta),
            _ => Vec::new(),
        },
        regime: efficiency_regime(omega).to_string(),
    }
}

pub fn run_efficiency(cfg: &McConfig) -> Result<EfficiencyReport> {
    Ok(efficiency_from(&run_size_power(cfg)?, &cfg.scenario.omega))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeEstimatorBias {
    pub estimator: EstimatorKind,
    pub mean_beta: Vec<f64>,
    pub bias: Vec<f64>,
    pub bias_mc_se: Vec<f64>,
    /// `mean_beta - plim_pols`.
    pub distance_from_plim: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeStudyReport {
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub replications: usize,
    pub beta: Vec<f64>,
    pub plim_pols: Vec<f64>,
    pub oracle_bias: Vec<f64>,
    pub estimators: Vec<MeEstimatorBias>,
}

pub fn me_study_from(report: &McReport) -> Result<MeStudyReport> {
    let oracle = report
        .measurement_error
        .as_ref()
        .ok_or_else(|| AppError::Config(format!("scenario {} has no measurement error", report.scenario)))?;
    Ok(MeStudyReport {
        scenario: report.scenario.clone(),
        config_hash: report.config_hash.clone(),
        seed: report.seed,
        replications: report.replications,
        beta: report.beta_null.clone(),
        plim_pols: oracle.plim_pols.clone(),
        oracle_bias: oracle.oracle_bias.clone(),
        estimators: report
            .estimators
            .iter()
            .map(|e| MeEstimatorBias {
                estimator: e.estimator,
                mean_beta: e.mean_beta.clone(),
                bias: e.bias.clone(),
                bias_mc_se: e.bias_mc_se.clone(),
                distance_from_plim: e.mean_beta.iter().zip(&oracle.plim_pols).map(|(m, p)| m - p).collect(),
            })
            .collect(),
    })
}

pub fn run_me_study(cfg: &McConfig) -> Result<MeStudyReport> {
    me_study_from(&run_size_power(cfg)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub estimator: EstimatorKind,
    pub true_cov: Matrix,
    pub mean_vhat: Matrix,
    pub mc_cov: Matrix,
    pub vhat_rel_error: f64,
    pub mc_cov_rel_error: f64,
    pub empirical_size: Option<f64>,
    pub size_mc_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub replications: usize,
    pub estimators: Vec<CalibrationRow>,
}

pub fn calibration_from(report: &McReport) -> Result<CalibrationReport> {
    let estimators = report
        .estimators
        .iter()
        .map(|e| match (&e.true_cov, e.vhat_rel_error, e.mc_cov_rel_error) {
            (Some(t), Some(v), Some(m)) => Ok(CalibrationRow {
                estimator: e.estimator,
                true_cov: t.clone(),
                mean_vhat: e.mean_vhat.clone(),
                mc_cov: e.mc_cov.clone(),
                vhat_rel_error: v,
                mc_cov_rel_error: m,
                empirical_size: e.empirical_size,
                size_mc_se: e.size_mc_se,
            }),
            _ => Err(AppError::Config(format!(
                "scenario {} has no exact variance (regressors are redrawn)",
                report.scenario
            ))),
        })
        .collect::<Result<_>>()?;
    Ok(CalibrationReport {
        scenario: report.scenario.clone(),
        config_hash: report.config_hash.clone(),
        seed: report.seed,
        replications: report.replications,
        estimators,
    })
}

/// Mean estimated covariance and Monte Carlo covariance against the exact
/// variances of both estimators.
pub fn variance_calibration(cfg: &McConfig) -> Result<CalibrationReport> {
    calibration_from(&run_size_power(cfg)?)
}

/// One-sample Kolmogorov-Smirnov statistic `sup |F_n - F|`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a KS statistic `d` from `n` observations, with the
/// Stephens small-sample adjustment.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = 2.0 * (-1f64).powi(j - 1) * (-2.0 * jf * jf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}
