//! Experiment configuration: the model keys plus run settings.
//!
//! | key           | default | meaning                                          |
//! |---------------|---------|--------------------------------------------------|
//! | `K`           | 8       | block horizon of the pseudo-orbit                |
//! | `n_max`       | 32      | largest Cesaro index checked                     |
//! | `delta`       | 1e-3    | window-average threshold                         |
//! | `tol`         | 1e-2    | bound on the Cesaro average at `n_max`           |
//! | `budget`      | 200     | optimizer multi-starts                           |
//! | `local_evals` | 12      | extra evaluations per start                      |
//! | `seed`        | 42      | optimizer seed                                   |
//! | `floor_tol`   | 1e-6    | relative slack on the shadowing floor            |
//! | `out`         | `out`   | output directory                                 |
//!
//! Model keys default to case `C` with gamma chosen automatically.

use std::collections::BTreeMap;
use std::path::PathBuf;

use lorenz_shadow::config::{parse_f64, parse_pairs, ModelConfig, MODEL_KEYS};
use lorenz_shadow::falsifier::{DEFAULT_FLOOR_TOL, DEFAULT_LOCAL_EVALS};
use lorenz_shadow::{Case, ModelParams};

use crate::error::CliError;

pub const EXPERIMENT_KEYS: [&str; 9] = [
    "K", "n_max", "delta", "tol", "budget", "local_evals", "seed", "floor_tol", "out",
];

/// How gamma was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaSource {
    Given,
    Auto,
    /// Automatic choice failed; `params.gamma` is 0.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub gamma: GammaSource,
    pub k: usize,
    pub n_max: usize,
    pub delta: f64,
    pub tol: f64,
    pub budget: usize,
    pub local_evals: usize,
    pub seed: u64,
    pub floor_tol: f64,
    pub out: PathBuf,
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub case: Option<Case>,
    pub out: Option<PathBuf>,
}

fn int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Config(format!("`{key}`: `{v}` is not a non-negative integer")))
}

impl ExperimentConfig {
    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self, CliError> {
        let mut pairs = parse_pairs(text).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(k) = pairs
            .keys()
            .find(|k| !MODEL_KEYS.contains(&k.as_str()) && !EXPERIMENT_KEYS.contains(&k.as_str()))
        {
            return Err(CliError::Config(format!("unknown key `{k}`")));
        }
        if let Some(s) = overrides.seed {
            pairs.insert("seed".into(), s.to_string());
        }
        if let Some(b) = overrides.budget {
            pairs.insert("budget".into(), b.to_string());
        }
        if let Some(c) = overrides.case {
            pairs.insert("case".into(), c.to_string());
        }
        if let Some(o) = &overrides.out {
            pairs.insert("out".into(), o.display().to_string());
        }
        Self::from_pairs(&pairs)
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let cfg = |e: lorenz_shadow::Error| CliError::Config(e.to_string());
        let (mut params, given) = ModelConfig::unresolved(pairs).map_err(cfg)?;
        let gamma = if given {
            GammaSource::Given
        } else {
            match params.with_auto_gamma() {
                Ok(p) => {
                    params = p;
                    GammaSource::Auto
                }
                Err(e) => GammaSource::Failed(e.to_string()),
            }
        };
        let get = |k: &str| pairs.get(k).map(String::as_str);
        let real = |k: &str, d: f64| get(k).map_or(Ok(d), |v| parse_f64(k, v).map_err(cfg));

        let k: usize = get("K").map_or(Ok(8), |v| int("K", v))?;
        if k == 0 {
            return Err(CliError::Config("`K` must be at least 1".into()));
        }
        let n_max: usize = get("n_max").map_or(Ok(32), |v| int("n_max", v))?;
        if n_max == 0 || n_max > 4 * k + 3 {
            return Err(CliError::Config(format!("`n_max` must lie in 1..={} for K = {k}", 4 * k + 3)));
        }
        let delta = real("delta", 1e-3)?;
        let tol = real("tol", 1e-2)?;
        let floor_tol = real("floor_tol", DEFAULT_FLOOR_TOL)?;
        if delta <= 0.0 || tol <= 0.0 {
            return Err(CliError::Config("`delta` and `tol` must be positive".into()));
        }
        if !(0.0..1.0).contains(&floor_tol) {
            return Err(CliError::Config("`floor_tol` must lie in [0, 1)".into()));
        }
        Ok(Self {
            params,
            gamma,
            k,
            n_max,
            delta,
            tol,
            budget: get("budget").map_or(Ok(200), |v| int("budget", v))?,
            local_evals: get("local_evals").map_or(Ok(DEFAULT_LOCAL_EVALS), |v| int("local_evals", v))?,
            seed: get("seed").map_or(Ok(42), |v| int("seed", v))?,
            floor_tol,
            out: PathBuf::from(get("out").unwrap_or("out")),
        })
    }

    /// Parameters usable for construction: gamma resolved, axioms and case hold.
    pub fn checked_params(&self) -> Result<ModelParams, CliError> {
        if let GammaSource::Failed(e) = &self.gamma {
            return Err(CliError::Config(format!("no admissible gamma: {e}")));
        }
        self.params.check_case()?;
        self.params.validate()?;
        Ok(self.params)
    }
}
