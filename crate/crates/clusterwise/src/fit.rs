//! The `fit` command: both estimators on one CSV, coefficient tables,
//! goodness of fit and Wald tests.

use std::path::{Path, PathBuf};

use clusterwise_core::data::{balance_profile, cluster_average, BalanceProfile};
use clusterwise_core::estimators::{
    fit_averaged_with, fit_pooled_with, goodness_of_fit, EstimatorKind, FitOptions, FitResult,
};
use clusterwise_core::inference::{coef_table, wald_test, PValueReference};
use serde::{Deserialize, Serialize};

use crate::config::FitConfig;
use crate::csv_io::{load_csv, LoadedData};
use crate::error::{AppError, Result};
use crate::report::{fmt_opt, hash_json, write_csv_rows, write_json};

/// Non-finite numbers (infinite t-ratios, AIC of a perfect fit) are `None`
/// so that the JSON report reads back losslessly.
fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_value: Option<f64>,
    pub p_value: f64,
    pub degenerate_se: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub r2: f64,
    pub adj_r2: Option<f64>,
    pub pseudo_r2: f64,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub n_used: usize,
    pub n_params: usize,
    pub perfect_fit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldRow {
    pub hypothesis: String,
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorFit {
    pub estimator: EstimatorKind,
    pub beta: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub coefficients: Vec<CoefficientRow>,
    /// `None` when the response it was fitted to has no variation.
    pub metrics: Option<FitMetrics>,
    pub wald: Vec<WaldRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub config_hash: String,
    pub input: String,
    pub terms: Vec<String>,
    pub rows_read: usize,
    pub dropped_na_rows: usize,
    pub dropped_clusters: usize,
    pub dropped_cluster_rows: usize,
    pub clusters: usize,
    pub n_obs: usize,
    pub balance: BalanceProfile,
    pub df_correction: bool,
    pub reference: PValueReference,
    pub level: f64,
    pub estimators: Vec<EstimatorFit>,
}

impl FitReport {
    pub fn estimator(&self, kind: EstimatorKind) -> Option<&EstimatorFit> {
        self.estimators.iter().find(|e| e.estimator == kind)
    }
}

fn one_estimator(cfg: &FitConfig, data: &LoadedData, kind: EstimatorKind) -> Result<EstimatorFit> {
    let opts = FitOptions {
        df_correction: cfg.df_correction,
    };
    let ds = &data.dataset;
    let (fit, y_used): (FitResult, Vec<f64>) = match kind {
        EstimatorKind::Pooled => (fit_pooled_with(ds, opts)?, ds.stacked_y()),
        EstimatorKind::Averaged => (fit_averaged_with(ds, opts)?, cluster_average(ds).ybar),
    };
    let reference = if cfg.t_reference {
        PValueReference::StudentClusters
    } else {
        PValueReference::Normal
    };
    let names: Vec<&str> = data.terms.iter().map(String::as_str).collect();
    let coefficients = coef_table(&fit, &names, reference)?
        .into_iter()
        .map(|r| CoefficientRow {
            term: r.name,
            estimate: r.estimate,
            std_error: r.se,
            t_value: finite(r.t_value),
            p_value: r.p_value,
            degenerate_se: r.degenerate_se,
        })
        .collect();
    let metrics = match goodness_of_fit(&fit, &y_used) {
        Ok(m) => Some(FitMetrics {
            r2: m.r2,
            adj_r2: finite(m.adj_r2),
            pseudo_r2: m.pseudo_r2,
            aic: finite(m.aic),
            bic: finite(m.bic),
            n_used: m.n_used,
            n_params: m.n_params,
            perfect_fit: m.perfect_fit,
        }),
        Err(clusterwise_core::Error::DegenerateVariance) => None,
        Err(e) => return Err(e.into()),
    };
    let mut wald = Vec::with_capacity(cfg.hypotheses.len());
    for (i, h) in cfg.hypotheses.iter().enumerate() {
        let name = if h.name.is_empty() {
            format!("h{}", i + 1)
        } else {
            h.name.clone()
        };
        let k = fit.n_params();
        if h.restriction.iter().any(|row| row.len() != k) {
            return Err(AppError::Config(format!(
                "hypothesis `{name}` needs {k} columns per restriction row"
            )));
        }
        let hyp = h.spec().build()?;
        let res = wald_test(&fit, &hyp, cfg.level).map_err(|source| match AppError::from(source) {
            AppError::Numerical(source) => AppError::Wald {
                hypothesis: name.clone(),
                estimator: kind.as_str(),
                source,
            },
            other => other,
        })?;
        wald.push(WaldRow {
            hypothesis: name,
            statistic: res.statistic,
            df: res.df,
            p_value: res.p_value,
            rejected: res.p_value < cfg.level,
        });
    }
    Ok(EstimatorFit {
        estimator: kind,
        beta: fit.beta.clone(),
        cov: fit.cov.to_rows(),
        coefficients,
        metrics,
        wald,
    })
}

pub fn run_fit(cfg: &FitConfig) -> Result<FitReport> {
    cfg.validate()?;
    let data = load_csv(&cfg.input, &cfg.schema)?;
    run_fit_on(cfg, &data)
}

/// Same as [`run_fit`] for data already in memory.
pub fn run_fit_on(cfg: &FitConfig, data: &LoadedData) -> Result<FitReport> {
    cfg.validate()?;
    let estimators = cfg
        .estimators
        .iter()
        .map(|&k| one_estimator(cfg, data, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(FitReport {
        config_hash: hash_json(cfg),
        input: cfg.input.display().to_string(),
        terms: data.terms.clone(),
        rows_read: data.rows_read,
        dropped_na_rows: data.dropped_na_rows,
        dropped_clusters: data.dropped_clusters,
        dropped_cluster_rows: data.dropped_cluster_rows,
        clusters: data.dataset.n_clusters(),
        n_obs: data.dataset.n_obs(),
        balance: balance_profile(&data.dataset),
        df_correction: cfg.df_correction,
        reference: if cfg.t_reference {
            PValueReference::StudentClusters
        } else {
            PValueReference::Normal
        },
        level: cfg.level,
        estimators,
    })
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub fn coefficient_table(report: &FitReport) -> (Vec<String>, Vec<Vec<String>>) {
    let header = strings(&[
        "estimator",
        "term",
        "estimate",
        "std_error",
        "t_value",
        "p_value",
        "config_hash",
    ]);
    let mut rows = Vec::new();
    for e in &report.estimators {
        for c in &e.coefficients {
            let t = match c.t_value {
                Some(t) => t.to_string(),
                None if c.estimate < 0.0 => "-inf".into(),
                None => "inf".into(),
            };
            rows.push(vec![
                e.estimator.as_str().into(),
                c.term.clone(),
                c.estimate.to_string(),
                c.std_error.to_string(),
                t,
                c.p_value.to_string(),
                report.config_hash.clone(),
            ]);
        }
    }
    (header, rows)
}

pub fn metrics_table(report: &FitReport) -> (Vec<String>, Vec<Vec<String>>) {
    let header = strings(&[
        "estimator",
        "r2",
        "adj_r2",
        "pseudo_r2",
        "aic",
        "bic",
        "n_used",
        "n_params",
        "clusters",
        "dropped_clusters",
        "config_hash",
    ]);
    let rows = report
        .estimators
        .iter()
        .map(|e| {
            let m = e.metrics.as_ref();
            vec![
                e.estimator.as_str().into(),
                fmt_opt(m.map(|m| m.r2)),
                fmt_opt(m.and_then(|m| m.adj_r2)),
                fmt_opt(m.map(|m| m.pseudo_r2)),
                fmt_opt(m.and_then(|m| m.aic)),
                fmt_opt(m.and_then(|m| m.bic)),
                m.map(|m| m.n_used.to_string()).unwrap_or_default(),
                m.map(|m| m.n_params.to_string()).unwrap_or_default(),
                report.clusters.to_string(),
                report.dropped_clusters.to_string(),
                report.config_hash.clone(),
            ]
        })
        .collect();
    (header, rows)
}

pub fn wald_table(report: &FitReport) -> (Vec<String>, Vec<Vec<String>>) {
    let header = strings(&[
        "estimator",
        "hypothesis",
        "statistic",
        "df",
        "p_value",
        "rejected",
        "level",
        "config_hash",
    ]);
    let mut rows = Vec::new();
    for e in &report.estimators {
        for w in &e.wald {
            rows.push(vec![
                e.estimator.as_str().into(),
                w.hypothesis.clone(),
                w.statistic.to_string(),
                w.df.to_string(),
                w.p_value.to_string(),
                w.rejected.to_string(),
                report.level.to_string(),
                report.config_hash.clone(),
            ]);
        }
    }
    (header, rows)
}

/// Writes `fit_report.json`, `coefficients.csv`, `fit_metrics.csv` and,
/// when hypotheses were given, `wald.csv`.
pub fn write_fit_outputs(dir: &Path, report: &FitReport) -> Result<Vec<PathBuf>> {
    let json = dir.join("fit_report.json");
    write_json(&json, report)?;
    let mut out = vec![json];
    let coef = dir.join("coefficients.csv");
    let (h, r) = coefficient_table(report);
    write_csv_rows(&coef, &h, &r)?;
    out.push(coef);
    let metrics = dir.join("fit_metrics.csv");
    let (h, r) = metrics_table(report);
    write_csv_rows(&metrics, &h, &r)?;
    out.push(metrics);
    if report.estimators.iter().any(|e| !e.wald.is_empty()) {
        let wald = dir.join("wald.csv");
        let (h, r) = wald_table(report);
        write_csv_rows(&wald, &h, &r)?;
        out.push(wald);
    }
    Ok(out)
}
