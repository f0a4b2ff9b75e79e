use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::noise::NoiseModel;
use crate::problems::ProblemConfig;
use crate::schedules::{Fidelity, Method, RegimeCase};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
}

/// Optional overrides of the constants a schedule is built from. Unset
/// fields are taken from the problem instance and noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConstantOverrides {
    #[serde(default)]
    pub l: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
}

/// A multi-trial experiment. `ks` are nominal horizons; the number of updates
/// each run performs follows from the method and case (see
/// [`super::steps_for`]). For `r_clipped_sstm` the horizon list must be empty
/// and `epsilon` sets the restart plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub problem: ProblemConfig,
    pub noise: NoiseModel,
    pub method: Method,
    pub case: RegimeCase,
    #[serde(default)]
    pub fidelity: Fidelity,
    #[serde(default)]
    pub ks: Vec<usize>,
    /// Trials per horizon; defaults to `max(200, ceil(20 / beta))`.
    #[serde(default)]
    pub trials: Option<usize>,
    pub beta: f64,
    /// Quantile level; defaults to `1 - beta`.
    #[serde(default)]
    pub quantile: Option<f64>,
    /// Failure threshold for `P{metric > epsilon}`; also the restart target.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Step size for plain SGD.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub constants: ConstantOverrides,
    pub seed_base: u64,
    #[serde(default)]
    pub output: OutputPaths,
}

pub fn default_trials(beta: f64) -> usize {
    ((20.0 / beta).ceil() as usize).max(200)
}

impl ExperimentConfig {
    pub fn n_trials(&self) -> usize {
        self.trials.unwrap_or_else(|| default_trials(self.beta))
    }

    pub fn quantile_level(&self) -> f64 {
        self.quantile.unwrap_or(1.0 - self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(config(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        let q = self.quantile_level();
        if !(q > 0.0 && q < 1.0) {
            return Err(config(format!("quantile level must lie in (0, 1), got {q}")));
        }
        if self.n_trials() == 0 {
            return Err(config("trials must be at least 1"));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(config("epsilon must be positive"));
            }
        }
        self.noise.validate()?;
        match self.method {
            Method::RClippedSstm => {
                if !self.ks.is_empty() {
                    return Err(config("r_clipped_sstm takes its length from the restart plan; leave ks empty"));
                }
                if self.epsilon.is_none() {
                    return Err(config("r_clipped_sstm needs epsilon"));
                }
            }
            Method::Sgd => {
                if !self.gamma.is_some_and(|g| g >= 0.0) {
                    return Err(config("plain SGD needs a nonnegative gamma"));
                }
            }
            _ => {}
        }
        if !case_allowed(self.method, self.case) {
            return Err(config(format!("case {} is not defined for {}", self.case.as_str(), self.method.as_str())));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config(format!("invalid experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

pub fn case_allowed(method: Method, case: RegimeCase) -> bool {
    use RegimeCase::*;
    match method {
        Method::Sgd => true,
        Method::ClippedSgd => matches!(case, Nonconvex | Pl | Convex | Qsc),
        Method::ClippedSstm => case == Convex,
        Method::RClippedSstm => case == Qsc,
        Method::ClippedSeg => matches!(case, Monotone | Qsm),
        Method::ClippedSgda => matches!(case, MonotoneStarCoco | StarCoco | Qsm),
    }
}
