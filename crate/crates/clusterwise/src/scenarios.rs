//! Named simulation scenarios.
//!
//! `table2:G<g>` / `table3:G<g>` are balanced designs with the raw and scaled
//! strong-dependence covariances; `table4`..`table7` place one large cluster
//! of size `N1` among small ones. The bare names `table2` and `table3` default
//! to `G = 500` and accept a cluster-count override.

use clusterwise_core::covgen::OmegaSpec;
use clusterwise_core::dgp::{DesignKind, DesignSpec, MeColumn, MeasurementErrorSpec};
use clusterwise_core::inference::LinearHypothesis;
use clusterwise_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

/// `H0: R beta = r`, written out row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisSpec {
    pub restriction: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl HypothesisSpec {
    /// `beta_j = value` among `k` coefficients.
    pub fn coefficient(k: usize, j: usize, value: f64) -> Self {
        let mut row = vec![0.0; k];
        row[j] = 1.0;
        Self {
            restriction: vec![row],
            rhs: vec![value],
        }
    }

    pub fn build(&self) -> Result<LinearHypothesis> {
        let r = Matrix::from_rows(&self.restriction).map_err(|e| AppError::Config(format!("hypothesis: {e}")))?;
        Ok(LinearHypothesis::new(r, self.rhs.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub design: DesignSpec,
    pub omega: OmegaSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_error: Option<MeasurementErrorSpec>,
    pub beta_null: Vec<f64>,
    pub beta_alt: Vec<f64>,
    pub hypothesis: HypothesisSpec,
    #[serde(default = "default_level")]
    pub level: f64,
}

pub fn default_level() -> f64 {
    0.05
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.omega.validate()?;
        let k = self.design.n_params();
        if self.beta_null.len() != k || self.beta_alt.len() != k {
            return Err(AppError::Config(format!(
                "beta_null and beta_alt need {k} entries for this design"
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(AppError::Config(format!("level {} outside (0, 1)", self.level)));
        }
        let h = self.hypothesis.build()?;
        if h.restriction.cols() != k {
            return Err(AppError::Config(format!("hypothesis needs {k} columns")));
        }
        Ok(())
    }

    /// Replaces the number of clusters, renaming the scenario to match.
    pub fn with_clusters(mut self, clusters: usize) -> Self {
        self.design.clusters = clusters;
        self.name = match self.design.kind {
            DesignKind::Balanced => format!("{}:G{clusters}", family(&self.name)),
            DesignKind::UnbalancedOneLarge { large_size } => {
                format!("{}:G{clusters}N{large_size}", family(&self.name))
            }
        };
        self
    }

    pub fn with_large_size(mut self, large_size: usize) -> Result<Self> {
        match self.design.kind {
            DesignKind::UnbalancedOneLarge { .. } => {
                self.design.kind = DesignKind::UnbalancedOneLarge { large_size };
                let g = self.design.clusters;
                Ok(self.with_clusters(g))
            }
            DesignKind::Balanced => Err(AppError::Config(format!(
                "scenario {} has no large cluster to resize",
                self.name
            ))),
        }
    }
}

fn family(name: &str) -> &str {
    name.split(':').next().unwrap_or(name)
}

const NULL: [f64; 2] = [1.0, 0.0];

fn slope_test() -> HypothesisSpec {
    HypothesisSpec::coefficient(2, 1, 0.0)
}

fn balanced(family: &str, clusters: usize, omega: OmegaSpec, alt_slope: f64) -> Scenario {
    Scenario {
        name: format!("{family}:G{clusters}"),
        design: DesignSpec::balanced(clusters),
        omega,
        measurement_error: None,
        beta_null: NULL.to_vec(),
        beta_alt: vec![1.0, alt_slope],
        hypothesis: slope_test(),
        level: default_level(),
    }
}

fn unbalanced(family: &str, clusters: usize, large: usize, omega: OmegaSpec, alt_slope: f64) -> Scenario {
    Scenario {
        name: format!("{family}:G{clusters}N{large}"),
        design: DesignSpec::unbalanced(clusters, large),
        ..balanced(family, clusters, omega, alt_slope)
    }
}

pub const BALANCED_CLUSTERS: [usize; 5] = [25, 50, 100, 200, 500];
const FIRST_HALF: [(usize, usize); 5] = [(25, 500), (25, 1500), (50, 500), (50, 1500), (100, 500)];
const SECOND_HALF: [(usize, usize); 5] = [(100, 1500), (200, 500), (200, 1500), (500, 500), (500, 1500)];

/// Slope of the measurement-error studies; both coefficients are one.
pub const ME_BETA: [f64; 2] = [1.0, 1.0];
pub const ME_CLUSTERS: usize = 500;

/// Classical measurement error on the slope regressor.
pub fn measurement_error_scenario(kind: &str, clusters: usize) -> Option<Scenario> {
    let gamma = match kind {
        "none" => MeColumn {
            column: 1,
            omega: OmegaSpec::Identity,
            scale: 0.0,
        },
        "weak" => MeColumn {
            column: 1,
            omega: OmegaSpec::Identity,
            scale: 100.0,
        },
        "semistrong" => MeColumn {
            column: 1,
            omega: OmegaSpec::SemiStrongBlock { exponent: 0.5 },
            scale: 100.0,
        },
        "strong" => MeColumn {
            column: 1,
            omega: OmegaSpec::Equicorrelated { a: 100.0, b: 50.0 },
            scale: 1.0,
        },
        _ => return None,
    };
    Some(Scenario {
        name: format!("me:{kind}"),
        design: DesignSpec::balanced(clusters),
        omega: OmegaSpec::ScaledStrong,
        measurement_error: Some(MeasurementErrorSpec { columns: vec![gamma] }),
        beta_null: ME_BETA.to_vec(),
        beta_alt: vec![1.0, 1.08],
        hypothesis: HypothesisSpec::coefficient(2, 1, 1.0),
        level: default_level(),
    })
}

/// One cluster of size `N1 = G` with equicorrelated errors `(a, b) = (2, 1)`.
pub fn efficiency_scenario(clusters: usize) -> Scenario {
    let mut s = unbalanced("efficiency", clusters, clusters, OmegaSpec::Equicorrelated { a: 2.0, b: 1.0 }, 0.08);
    s.name = "efficiency".into();
    s
}

/// Equal cluster sizes, identity errors and regressors that barely vary
/// within clusters, where both estimators should be about equally precise.
pub fn efficiency_homoskedastic_scenario(clusters: usize) -> Scenario {
    let mut s = balanced("efficiency", clusters, OmegaSpec::Identity, 0.08);
    s.name = "efficiency:homoskedastic".into();
    s.design.size_range = (20, 20);
    s.design.var_range = (1.0, 2.0);
    s
}

/// Every named cell, in display order.
pub fn catalog() -> Vec<Scenario> {
    let mut out = Vec::new();
    for g in BALANCED_CLUSTERS {
        out.push(balanced("table2", g, OmegaSpec::RandomStrong, 0.08));
    }
    for g in BALANCED_CLUSTERS {
        out.push(balanced("table3", g, OmegaSpec::ScaledStrong, 0.003));
    }
    for (g, n1) in FIRST_HALF {
        out.push(unbalanced("table4", g, n1, OmegaSpec::RandomStrong, 0.08));
    }
    for (g, n1) in SECOND_HALF {
        out.push(unbalanced("table5", g, n1, OmegaSpec::RandomStrong, 0.08));
    }
    for (g, n1) in FIRST_HALF {
        out.push(unbalanced("table6", g, n1, OmegaSpec::ScaledStrong, 0.003));
    }
    for (g, n1) in SECOND_HALF {
        out.push(unbalanced("table7", g, n1, OmegaSpec::ScaledStrong, 0.003));
    }
    out.push(efficiency_scenario(100));
    out.push(efficiency_homoskedastic_scenario(100));
    for kind in ["none", "weak", "semistrong", "strong"] {
        out.extend(measurement_error_scenario(kind, ME_CLUSTERS));
    }
    out
}

/// Resolves a catalog name. `table2` and `table3` alone mean `G = 500`.
pub fn lookup(name: &str) -> Result<Scenario> {
    let name = name.trim();
    let canonical = match name {
        "table2" | "table3" => format!("{name}:G500"),
        other => other.to_string(),
    };
    if let Some(s) = catalog().into_iter().find(|s| s.name == canonical) {
        return Ok(s);
    }
    // Off-grid cells of the balanced and one-large-cluster families.
    if let Some((fam, cell)) = canonical.split_once(':') {
        let template = catalog().into_iter().find(|s| family(&s.name) == fam && !fam.starts_with("me"));
        if let (Some(t), Some(rest)) = (template, cell.strip_prefix('G')) {
            match (t.design.kind, rest.split_once('N')) {
                (DesignKind::Balanced, None) => {
                    if let Ok(g) = rest.parse() {
                        return Ok(t.with_clusters(g));
                    }
                }
                (DesignKind::UnbalancedOneLarge { .. }, Some((g, n1))) => {
                    if let (Ok(g), Ok(n1)) = (g.parse(), n1.parse()) {
                        return t.with_clusters(g).with_large_size(n1);
                    }
                }
                _ => {}
            }
        }
    }
    Err(AppError::Config(format!(
        "unknown scenario `{name}` (see --list-scenarios)"
    )))
}

/// One line per catalog entry.
pub fn describe(s: &Scenario) -> String {
    let d = &s.design;
    let layout = match d.kind {
        DesignKind::Balanced => format!("G={} N_g in {}..={}", d.clusters, d.size_range.0, d.size_range.1),
        DesignKind::UnbalancedOneLarge { large_size } => format!(
            "G={} N1={} N_g in {}..={}",
            d.clusters, large_size, d.size_range.0, d.size_range.1
        ),
    };
    let me = s
        .measurement_error
        .as_ref()
        .and_then(|m| m.columns.first())
        .map(|c| format!(" gamma={}x{}", c.scale, c.omega.name()))
        .unwrap_or_default();
    format!(
        "{:<22} {layout} omega={}{me} beta0={:?} beta1={:?}",
        s.name,
        s.omega.name(),
        s.beta_null,
        s.beta_alt
    )
}
