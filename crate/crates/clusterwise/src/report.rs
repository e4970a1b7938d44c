//! Report files: JSON documents, one flat CSV row per (scenario, estimator),
//! and tidy long-format CSV for plotting.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{AppError, Result};
use crate::montecarlo::{McConfig, McReport};

/// SHA-256 prefix of the canonical JSON of `value`.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialise");
    hex::encode(&Sha256::digest(&bytes)[..8])
}

/// Hash of everything that determines a Monte Carlo report. The worker count
/// is excluded because it cannot change results.
pub fn config_hash(cfg: &McConfig) -> String {
    let mut canonical = cfg.clone();
    canonical.workers = 0;
    hash_json(&canonical)
}

/// `intercept, slope` for two coefficients, otherwise `intercept, slope1, ...`.
pub fn term_names(k: usize) -> Vec<String> {
    match k {
        0 => Vec::new(),
        1 => vec!["intercept".into()],
        2 => vec!["intercept".into(), "slope".into()],
        _ => std::iter::once("intercept".to_string())
            .chain((1..k).map(|j| format!("slope{j}")))
            .collect(),
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Turns a scenario name into a file stem (`table4:G25N500` -> `table4_G25N500`).
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| AppError::Output {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialise");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn write_csv_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| AppError::Output {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    };
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| AppError::Output {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    write_file(path, &bytes)
}

/// One row per estimator.
pub fn mc_flat_table(report: &McReport) -> (Vec<String>, Vec<Vec<String>>) {
    let terms = term_names(report.beta_null.len());
    let mut header: Vec<String> = [
        "scenario",
        "estimator",
        "config_hash",
        "seed",
        "replications",
        "failures",
        "clusters",
        "large_size",
        "n_obs",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(terms.iter().map(|t| format!("mse_{t}")));
    header.extend(terms.iter().map(|t| format!("bias_{t}")));
    header.extend(
        [
            "size",
            "size_mc_se",
            "cv",
            "size_corrected_cv",
            "power",
            "size_corrected_power",
            "degenerate_tests",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    let rows = report
        .estimators
        .iter()
        .map(|e| {
            let mut row = vec![
                report.scenario.clone(),
                e.estimator.as_str().to_string(),
                report.config_hash.clone(),
                report.seed.to_string(),
                report.replications.to_string(),
                report.failures.to_string(),
                report.design.clusters.to_string(),
                report.design.large_size.map(|n| n.to_string()).unwrap_or_default(),
                report.design.n_obs.to_string(),
            ];
            row.extend(e.mse.iter().map(f64::to_string));
            row.extend(e.bias.iter().map(f64::to_string));
            row.extend([
                fmt_opt(e.empirical_size),
                fmt_opt(e.size_mc_se),
                report.asymptotic_cv.to_string(),
                fmt_opt(e.size_corrected_cv),
                fmt_opt(e.power),
                fmt_opt(e.size_corrected_power),
                e.degenerate_tests.to_string(),
            ]);
            row
        })
        .collect();
    (header, rows)
}

/// Long format: one `(scenario, G, estimator, metric, value)` row per number.
pub fn mc_tidy_table(report: &McReport) -> (Vec<String>, Vec<Vec<String>>) {
    let header = ["scenario", "G", "estimator", "metric", "value", "config_hash", "seed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let terms = term_names(report.beta_null.len());
    let mut rows = Vec::new();
    for e in &report.estimators {
        let mut metrics: Vec<(String, Option<f64>)> = Vec::new();
        for (t, v) in terms.iter().zip(&e.mse) {
            metrics.push((format!("mse_{t}"), Some(*v)));
        }
        for (t, v) in terms.iter().zip(&e.bias) {
            metrics.push((format!("bias_{t}"), Some(*v)));
        }
        metrics.push(("size".into(), e.empirical_size));
        metrics.push(("size_corrected_cv".into(), e.size_corrected_cv));
        metrics.push(("power".into(), e.power));
        metrics.push(("size_corrected_power".into(), e.size_corrected_power));
        for (metric, value) in metrics {
            rows.push(vec![
                report.scenario.clone(),
                report.design.clusters.to_string(),
                e.estimator.as_str().to_string(),
                metric,
                fmt_opt(value),
                report.config_hash.clone(),
                report.seed.to_string(),
            ]);
        }
    }
    (header, rows)
}

/// Writes `<stem>.json`, `<stem>.csv` and `<stem>_tidy.csv` under `dir`.
pub fn write_mc_outputs(dir: &Path, report: &McReport) -> Result<Vec<PathBuf>> {
    let stem = file_stem(&report.scenario);
    let json = dir.join(format!("{stem}.json"));
    let flat = dir.join(format!("{stem}.csv"));
    let tidy = dir.join(format!("{stem}_tidy.csv"));
    write_json(&json, report)?;
    let (h, r) = mc_flat_table(report);
    write_csv_rows(&flat, &h, &r)?;
    let (h, r) = mc_tidy_table(report);
    write_csv_rows(&tidy, &h, &r)?;
    Ok(vec![json, flat, tidy])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_and_terms() {
        assert_eq!(file_stem("table4:G25N500"), "table4_G25N500");
        assert_eq!(term_names(2), ["intercept", "slope"]);
        assert_eq!(term_names(3), ["intercept", "slope1", "slope2"]);
    }

    #[test]
    fn hash_is_stable_and_short() {
        let h = hash_json(&serde_json::json!({"a": 1}));
        assert_eq!(h.len(), 16);
        assert_eq!(h, hash_json(&serde_json::json!({"a": 1})));
        assert_ne!(h, hash_json(&serde_json::json!({"a": 2})));
    }
}
