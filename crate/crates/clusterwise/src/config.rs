//! JSON run configuration. Unknown keys are rejected everywhere.
//!
//! ```json
//! {
//!   "fit": {
//!     "input": "households.csv",
//!     "schema": { "cluster_col": "commune", "y_col": "health", "x_cols": ["exp"] },
//!     "hypotheses": [{ "name": "no_effect", "restriction": [[0, 1]], "rhs": [0] }]
//!   },
//!   "mc": { "scenario": "table4:G25N500", "replications": 2000, "seed": 7 }
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use clusterwise_core::covgen::OmegaSpec;
use clusterwise_core::dgp::{DesignSpec, MeasurementErrorSpec};
use clusterwise_core::estimators::EstimatorKind;
use serde::{Deserialize, Serialize};

use crate::csv_io::CsvSchema;
use crate::error::{AppError, Result};
use crate::montecarlo::{McConfig, ESTIMATORS};
use crate::scenarios::{default_level, lookup, HypothesisSpec, Scenario};

/// Replications used when neither the config nor the command line sets one.
pub const DEFAULT_REPLICATIONS: usize = 2000;
pub const SEED_ENV: &str = "CLUSTERWISE_SEED";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitHypothesis {
    #[serde(default)]
    pub name: String,
    pub restriction: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl FitHypothesis {
    pub fn spec(&self) -> HypothesisSpec {
        HypothesisSpec {
            restriction: self.restriction.clone(),
            rhs: self.rhs.clone(),
        }
    }
}

fn all_estimators() -> Vec<EstimatorKind> {
    ESTIMATORS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub input: PathBuf,
    pub schema: CsvSchema,
    #[serde(default = "all_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub hypotheses: Vec<FitHypothesis>,
    #[serde(default)]
    pub df_correction: bool,
    /// Student t(G - 1) p-values for coefficients instead of the normal.
    #[serde(default)]
    pub t_reference: bool,
    #[serde(default = "default_level")]
    pub level: f64,
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(AppError::Config("fit.estimators is empty".into()));
        }
        if self.schema.min_cluster_size == 0 {
            return Err(AppError::Config("fit.schema.min_cluster_size must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(AppError::Config(format!("fit.level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

/// A named scenario, an inline one, or a named one with overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<OmegaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_error: Option<MeasurementErrorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<HypothesisSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_null: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_alt: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub large_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub df_correction: bool,
}

impl McSection {
    /// Layers `over` on top of `self`; set fields of `over` win.
    pub fn merged(&self, over: &McSection) -> McSection {
        macro_rules! pick {
            ($f:ident) => {
                over.$f.clone().or_else(|| self.$f.clone())
            };
        }
        McSection {
            scenario: pick!(scenario),
            name: pick!(name),
            design: pick!(design),
            omega: pick!(omega),
            measurement_error: pick!(measurement_error),
            hypothesis: pick!(hypothesis),
            beta_null: pick!(beta_null),
            beta_alt: pick!(beta_alt),
            level: pick!(level),
            clusters: pick!(clusters),
            large_size: pick!(large_size),
            replications: pick!(replications),
            seed: pick!(seed),
            workers: pick!(workers),
            df_correction: self.df_correction || over.df_correction,
        }
    }

    fn base_scenario(&self) -> Result<Scenario> {
        if let Some(name) = &self.scenario {
            let mut s = lookup(name)?;
            if let Some(d) = &self.design {
                s.design = d.clone();
            }
            if let Some(o) = self.omega {
                s.omega = o;
            }
            if self.measurement_error.is_some() {
                s.measurement_error = self.measurement_error.clone();
            }
            return Ok(s);
        }
        let (design, omega) = match (&self.design, self.omega) {
            (Some(d), Some(o)) => (d.clone(), o),
            _ => {
                return Err(AppError::Config(
                    "mc needs either `scenario` or both `design` and `omega`".into(),
                ))
            }
        };
        let k = design.n_params();
        let beta_null = self.beta_null.clone().unwrap_or_else(|| {
            let mut b = vec![0.0; k];
            b[0] = 1.0;
            b
        });
        let tested = k.min(2) - 1;
        Ok(Scenario {
            name: "custom".into(),
            hypothesis: HypothesisSpec::coefficient(k, tested, beta_null[tested.min(beta_null.len() - 1)]),
            beta_alt: beta_null.clone(),
            beta_null,
            design,
            omega,
            measurement_error: self.measurement_error.clone(),
            level: default_level(),
        })
    }

    /// Builds the run; the seed falls back to `CLUSTERWISE_SEED`, then 0.
    pub fn resolve(&self) -> Result<McConfig> {
        let mut s = self.base_scenario()?;
        if let Some(g) = self.clusters {
            s = s.with_clusters(g);
        }
        if let Some(n1) = self.large_size {
            s = s.with_large_size(n1)?;
        }
        if let Some(h) = &self.hypothesis {
            s.hypothesis = h.clone();
        }
        if let Some(b) = &self.beta_null {
            s.beta_null = b.clone();
        }
        if let Some(b) = &self.beta_alt {
            s.beta_alt = b.clone();
        }
        if let Some(l) = self.level {
            s.level = l;
        }
        if let Some(n) = &self.name {
            s.name = n.clone();
        }
        let seed = match self.seed {
            Some(s) => s,
            None => seed_from_env()?.unwrap_or(0),
        };
        let cfg = McConfig {
            scenario: s,
            replications: self.replications.unwrap_or(DEFAULT_REPLICATIONS),
            seed,
            workers: self.workers.unwrap_or(0),
            df_correction: self.df_correction,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| AppError::Config(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}
