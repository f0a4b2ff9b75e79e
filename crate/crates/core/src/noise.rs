//! Zero-mean perturbation models with a certified bound `E||xi||^alpha <= sigma^alpha`.

use serde::{Deserialize, Serialize};

use crate::error::{config, contract, Result};
use crate::rng::RngStream;
use crate::vector::DenseVector;

/// Parameters of the one-dimensional adversarial noise that defeats plain
/// SGD on `f(x) = mu x^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarialParams {
    /// Step size of the SGD run being attacked.
    pub gamma_step: f64,
    pub epsilon_target: f64,
    /// Horizon `K`; the noise fires only at step `K - 1`.
    pub horizon_k: usize,
    pub mu_problem: f64,
    /// `|x0|`, needed to evaluate the firing gate.
    pub x0_abs: f64,
}

impl AdversarialParams {
    /// `A = max{2 sqrt(eps) / (gamma sigma), 1}`.
    pub fn amplitude(&self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return 1.0;
        }
        (2.0 * self.epsilon_target.sqrt() / (self.gamma_step * sigma)).max(1.0)
    }

    /// True when the noiseless recursion `(1 - gamma mu)^K |x0|` has already
    /// reached `sqrt(eps)`, i.e. when the noise is allowed to fire.
    pub fn gate_open(&self) -> bool {
        let contraction = (1.0 - self.gamma_step * self.mu_problem).abs();
        contraction.powi(self.horizon_k as i32) * self.x0_abs <= self.epsilon_target.sqrt()
    }

    /// Probability that the final noise is nonzero, `1/A^2` (0 if the gate is shut).
    pub fn firing_probability(&self, sigma: f64) -> f64 {
        if self.gate_open() {
            1.0 / self.amplitude(sigma).powi(2)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    /// Isotropic normal with `E||xi||^2 = sigma^2`; requires `alpha = 2`.
    Gaussian,
    /// Uniform direction times a Pareto radius with tail index `p > alpha`.
    HeavyTailRadial { tail_index: f64 },
    ThreePointAdversarial(AdversarialParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub alpha: f64,
}

/// Default Pareto tail index for moment order `alpha`: `(alpha + 2)/2`, which
/// lies strictly between `alpha` and 2 so the variance is infinite. For
/// `alpha = 2` that formula degenerates to `p = alpha`, so 3 is used instead.
pub fn default_tail_index(alpha: f64) -> f64 {
    if alpha < 2.0 {
        (alpha + 2.0) / 2.0
    } else {
        3.0
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma: 0.0,
            alpha: 2.0,
        }
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        let m = Self {
            kind: NoiseKind::Gaussian,
            sigma,
            alpha: 2.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn heavy_tail(sigma: f64, alpha: f64, tail_index: Option<f64>) -> Result<Self> {
        let m = Self {
            kind: NoiseKind::HeavyTailRadial {
                tail_index: tail_index.unwrap_or_else(|| default_tail_index(alpha)),
            },
            sigma,
            alpha,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn three_point(sigma: f64, params: AdversarialParams) -> Result<Self> {
        let m = Self {
            kind: NoiseKind::ThreePointAdversarial(params),
            sigma,
            alpha: 2.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(config(format!("noise sigma must be finite and nonnegative, got {}", self.sigma)));
        }
        if !(self.alpha > 1.0 && self.alpha <= 2.0) {
            return Err(config(format!("noise moment order must lie in (1, 2], got {}", self.alpha)));
        }
        match self.kind {
            NoiseKind::None => {}
            NoiseKind::Gaussian => {
                if self.alpha != 2.0 {
                    return Err(config("gaussian noise requires alpha = 2"));
                }
            }
            NoiseKind::HeavyTailRadial { tail_index } => {
                if !(tail_index > self.alpha) || !tail_index.is_finite() {
                    return Err(config(format!(
                        "tail index {tail_index} must exceed alpha = {}",
                        self.alpha
                    )));
                }
            }
            NoiseKind::ThreePointAdversarial(p) => {
                if !(p.gamma_step > 0.0 && p.epsilon_target > 0.0 && p.horizon_k >= 1 && p.mu_problem >= 0.0) {
                    return Err(config("adversarial noise needs gamma > 0, epsilon > 0, K >= 1, mu >= 0"));
                }
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NoiseKind::None) || self.sigma == 0.0
    }

    /// Pareto scale `x_m = sigma ((p - alpha)/p)^(1/alpha)`, giving `E r^alpha = sigma^alpha`.
    fn pareto_scale(&self, p: f64) -> f64 {
        self.sigma * ((p - self.alpha) / p).powf(1.0 / self.alpha)
    }

    /// Writes one draw of the step-`k` noise into `out` without allocating.
    pub fn sample_into(&self, k: usize, out: &mut [f64], rng: &mut RngStream) -> Result<()> {
        let d = out.len();
        if d == 0 {
            return Err(contract("noise dimension must be positive"));
        }
        match self.kind {
            NoiseKind::None => out.fill(0.0),
            NoiseKind::Gaussian => {
                let sd = self.sigma / (d as f64).sqrt();
                for o in out.iter_mut() {
                    *o = sd * rng.standard_normal();
                }
            }
            NoiseKind::HeavyTailRadial { tail_index } => {
                rng.fill_unit_direction(out);
                let r = self.pareto_scale(tail_index) * rng.uniform_open().powf(-1.0 / tail_index);
                out.iter_mut().for_each(|o| *o *= r);
            }
            NoiseKind::ThreePointAdversarial(p) => {
                if d != 1 {
                    return Err(config(format!("adversarial noise is one-dimensional, got dim {d}")));
                }
                out[0] = 0.0;
                if k + 1 == p.horizon_k && p.gate_open() {
                    let a = p.amplitude(self.sigma);
                    let u = rng.uniform();
                    let q = 1.0 / (2.0 * a * a);
                    if u < q {
                        out[0] = -self.sigma * a;
                    } else if u < 2.0 * q {
                        out[0] = self.sigma * a;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self, k: usize, dim: usize, rng: &mut RngStream) -> Result<DenseVector> {
        if dim == 0 {
            return Err(contract("noise dimension must be positive"));
        }
        let mut v = DenseVector::zeros(dim);
        self.sample_into(k, v.as_mut_slice(), rng)?;
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCertificate {
    pub empirical_moment: f64,
    pub relative_se: f64,
    pub pass: bool,
}

/// Estimates `E||xi||^alpha` and passes iff the estimate is at most
/// `sigma^alpha (1 + 3 * relative standard error)`. The adversarial model is
/// certified at its firing step `K - 1`.
pub fn certify_moment(model: &NoiseModel, dim: usize, n_samples: usize, rng: &mut RngStream) -> Result<MomentCertificate> {
    if n_samples < 1000 {
        return Err(contract("moment certification needs at least 1000 samples"));
    }
    let k = match model.kind {
        NoiseKind::ThreePointAdversarial(p) => p.horizon_k - 1,
        _ => 0,
    };
    let mut buf = vec![0.0; dim];
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n_samples {
        model.sample_into(k, &mut buf, rng)?;
        let s = buf.iter().map(|t| t * t).sum::<f64>().sqrt().powf(model.alpha);
        let delta = s - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (s - mean);
    }
    let n = n_samples as f64;
    let se = (m2 / (n - 1.0) / n).sqrt();
    let rel = if mean > 0.0 { se / mean } else { 0.0 };
    let target = model.sigma.powf(model.alpha);
    Ok(MomentCertificate {
        empirical_moment: mean,
        relative_se: rel,
        pass: mean <= target * (1.0 + 3.0 * rel),
    })
}
