//! Seeded multi-trial experiments: quantiles with exact intervals, horizon
//! sweeps with slope fits, the adversarial counterexample, clip-lemma grids
//! and report emission.

pub mod config;
pub mod counterexample;
pub mod quantile;
pub mod report;
pub mod slope;
pub mod trials;

use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, SCHEMA_VERSION};
pub use counterexample::{counterexample_experiment, CounterexampleConfig, CounterexampleReport};
pub use quantile::{quantile_with_ci, QuantileEstimate};
pub use report::{emit_report, Format, KSummary, QuantileReport};
pub use slope::{fit_loglog_slope, SlopeFit};
pub use trials::{run_one, run_trials, steps_for};

use crate::clipping::{verify_lemma, LemmaCheck};
use crate::error::Result;
use crate::noise::NoiseModel;
use crate::rng::RngStream;
use crate::vector::DenseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesReport {
    pub report: QuantileReport,
    /// Fit of the quantile against `K`; absent with fewer than four positive rows.
    pub fit: Option<SlopeFit>,
    /// `-(alpha - 1)/alpha`, the exponent of the stochastic term.
    pub reference_slope: f64,
}

/// Trials over the configured horizon sweep followed by a log-log fit.
pub fn run_rates(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RatesReport> {
    let report = run_trials(cfg, threads)?;
    let pts: Vec<(f64, f64)> = report.rows.iter().map(|r| (r.k as f64, r.quantile)).collect();
    let fit = if pts.len() >= 4 && pts.iter().all(|p| p.1 > 0.0) {
        Some(fit_loglog_slope(&pts)?)
    } else {
        None
    };
    let a = cfg.noise.alpha;
    Ok(RatesReport {
        report,
        fit,
        reference_slope: -(a - 1.0) / a,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipGridConfig {
    pub alphas: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Clipping levels as multiples of `sigma`.
    pub lambda_factors: Vec<f64>,
    /// Norm of the mean point as a fraction of `lambda` (at most 1/2).
    pub mean_fraction: f64,
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for ClipGridConfig {
    fn default() -> Self {
        Self {
            alphas: vec![1.2, 1.5, 2.0],
            sigmas: vec![0.5, 1.0],
            lambda_factors: vec![4.0, 16.0],
            mean_fraction: 0.25,
            dim: 3,
            samples: 1_000_000,
            seed: 11,
        }
    }
}

/// Monte-Carlo check of the clipped-estimator bounds over a parameter grid,
/// with heavy-tailed noise at the default tail index.
pub fn verify_clip_grid(cfg: &ClipGridConfig) -> Result<Vec<LemmaCheck>> {
    let root = RngStream::new(cfg.seed);
    let mut out = Vec::new();
    let mut cell = 0u64;
    for &alpha in &cfg.alphas {
        for &sigma in &cfg.sigmas {
            for &factor in &cfg.lambda_factors {
                let lambda = factor * sigma;
                let noise = NoiseModel::heavy_tail(sigma, alpha, None)?;
                let mean = DenseVector::basis(cfg.dim, 0, cfg.mean_fraction * lambda);
                out.push(verify_lemma(&noise, &mean, lambda, cfg.samples, &root.child(cell))?);
                cell += 1;
            }
        }
    }
    Ok(out)
}
