//! Step sizes, clipping levels and restart plans with explicit constants.
//!
//! Every schedule sets the step size to the largest value its convergence
//! guarantee allows (equality in the `min`) and derives the clipping level
//! from it. A zero noise level removes the noise-dependent branch of every
//! `min`/`max`.

use serde::{Deserialize, Serialize};

use crate::error::{config, hypothesis, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sgd,
    ClippedSgd,
    ClippedSstm,
    RClippedSstm,
    ClippedSeg,
    ClippedSgda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeCase {
    Nonconvex,
    Pl,
    Convex,
    Qsc,
    Monotone,
    Qsm,
    StarCoco,
    MonotoneStarCoco,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Sgd => "sgd",
            Method::ClippedSgd => "clipped_sgd",
            Method::ClippedSstm => "clipped_sstm",
            Method::RClippedSstm => "r_clipped_sstm",
            Method::ClippedSeg => "clipped_seg",
            Method::ClippedSgda => "clipped_sgda",
        }
    }
}

impl RegimeCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeCase::Nonconvex => "nonconvex",
            RegimeCase::Pl => "pl",
            RegimeCase::Convex => "convex",
            RegimeCase::Qsc => "qsc",
            RegimeCase::Monotone => "monotone",
            RegimeCase::Qsm => "qsm",
            RegimeCase::StarCoco => "star_coco",
            RegimeCase::MonotoneStarCoco => "monotone_star_coco",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaKind {
    /// `lambda_k = lambda_scale`.
    Constant,
    /// `lambda_k = lambda_scale * exp(-gamma * decay_rate * (1 + k/2))`.
    ExpDecay,
    /// `lambda_k = lambda_scale / alpha_{k+1}` with `alpha_{k+1} = (k + 2) gamma`
    /// (accelerated method, `gamma = 1/(2aL)`).
    InverseAlpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Fidelity {
    /// Constants exactly as in the convergence guarantees.
    Theory,
    /// Step size multiplied by `gamma_factor`; the clipping level is recomputed
    /// from the same closed form, so the product `gamma * lambda` is unchanged.
    Practical { gamma_factor: f64 },
}

impl Default for Fidelity {
    fn default() -> Self {
        Fidelity::Theory
    }
}

pub const DEFAULT_PRACTICAL_FACTOR: f64 = 20.0;

impl Fidelity {
    fn factor(&self) -> Result<f64> {
        match *self {
            Fidelity::Theory => Ok(1.0),
            Fidelity::Practical { gamma_factor } if gamma_factor > 0.0 && gamma_factor.is_finite() => Ok(gamma_factor),
            Fidelity::Practical { gamma_factor } => Err(config(format!("gamma factor must be positive, got {gamma_factor}"))),
        }
    }
}

/// Problem and run constants a schedule depends on. `l` is the smoothness
/// (or Lipschitz, or star-cocoercivity) constant; `r` bounds `||x0 - x*||`;
/// `delta` bounds `f(x0) - f*` and is used only by the nonconvex and PL cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub l: f64,
    pub mu: f64,
    pub r: f64,
    pub delta: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub horizon_k: usize,
    pub beta: f64,
}

impl ScheduleParams {
    fn validate(&self) -> Result<()> {
        if !(self.l > 0.0) || !self.l.is_finite() {
            return Err(config(format!("smoothness constant must be positive, got {}", self.l)));
        }
        if !(self.sigma >= 0.0) || !(self.mu >= 0.0) {
            return Err(config("sigma and mu must be nonnegative"));
        }
        if !(self.alpha > 1.0 && self.alpha <= 2.0) {
            return Err(config(format!("alpha must lie in (1, 2], got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(config(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        Ok(())
    }

    fn need_r(&self) -> Result<f64> {
        if self.r > 0.0 && self.r.is_finite() {
            Ok(self.r)
        } else {
            Err(config("radius R must be positive"))
        }
    }

    fn need_delta(&self) -> Result<f64> {
        if self.delta > 0.0 && self.delta.is_finite() {
            Ok(self.delta)
        } else {
            Err(config("initial gap Delta must be positive"))
        }
    }

    fn need_mu(&self) -> Result<f64> {
        if self.mu > 0.0 {
            Ok(self.mu)
        } else {
            Err(config("this regime needs mu > 0"))
        }
    }

    /// `ln(m (K+1) / beta)`, rejected when below 1.
    fn log_term(&self, m: f64) -> Result<f64> {
        check_log(((m * (self.horizon_k as f64 + 1.0)) / self.beta).ln())
    }
}

fn check_log(v: f64) -> Result<f64> {
    if v >= 1.0 {
        Ok(v)
    } else {
        Err(hypothesis(format!("log term {v} is below 1")))
    }
}

/// A complete parameter pack for one method, regime and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub method: Method,
    pub case: RegimeCase,
    pub gamma: f64,
    pub lambda_kind: LambdaKind,
    pub lambda_scale: f64,
    pub decay_rate: f64,
    pub a_param: Option<f64>,
    pub b_k: Option<f64>,
    pub horizon_k: usize,
    pub beta: f64,
    pub log_term: f64,
}

impl Schedule {
    /// Clipping level at step `k`.
    #[inline]
    pub fn lambda(&self, k: usize) -> f64 {
        match self.lambda_kind {
            LambdaKind::Constant => self.lambda_scale,
            LambdaKind::ExpDecay => self.lambda_scale * (-self.gamma * self.decay_rate * (1.0 + k as f64 / 2.0)).exp(),
            LambdaKind::InverseAlpha => self.lambda_scale / self.alpha_next(k),
        }
    }

    /// `alpha_{k+1} = (k + 2) / (2aL)` of the accelerated method.
    #[inline]
    pub fn alpha_next(&self, k: usize) -> f64 {
        (k as f64 + 2.0) * self.gamma
    }

    /// The right-hand side of the high-probability guarantee for this
    /// schedule's metric, or `None` when no closed form is attached.
    ///
    /// Indexing follows the guarantees: for the exponential regimes the
    /// bound applies to the iterate after `horizon_k + 1` updates, for the
    /// averaged and accelerated ones to the output after `horizon_k` updates
    /// (extragradient: `horizon_k + 1` extrapolation points).
    pub fn guarantee(&self, p: &ScheduleParams) -> Option<f64> {
        let g = self.gamma;
        let k1 = self.horizon_k as f64 + 1.0;
        let (r2, delta) = (p.r * p.r, p.delta);
        match (self.method, self.case) {
            (Method::ClippedSgd, RegimeCase::Nonconvex) => Some(2.0 * delta / (g * (1.0 - p.l * g / 2.0) * k1)),
            (Method::ClippedSgd, RegimeCase::Pl) => Some(2.0 * (-g * p.mu * k1).exp() * delta),
            (Method::ClippedSgd, RegimeCase::Convex) => Some(2.0 * r2 / (g * k1)),
            (Method::ClippedSgd, RegimeCase::Qsc) => Some(2.0 * (-g * p.mu / 2.0 * k1).exp() * r2),
            (Method::ClippedSstm, _) => {
                let k = self.horizon_k as f64;
                self.a_param.map(|a| 6.0 * a * p.l * r2 / (k * (k + 3.0)))
            }
            (Method::ClippedSeg, RegimeCase::Monotone) => Some(9.0 * r2 / (2.0 * g * k1)),
            (Method::ClippedSeg, RegimeCase::Qsm) => Some(2.0 * (-g * p.mu * k1).exp() * r2),
            (Method::ClippedSgda, RegimeCase::MonotoneStarCoco) => Some(5.0 * r2 / (g * k1)),
            (Method::ClippedSgda, RegimeCase::StarCoco) => Some(2.0 * p.l * r2 / (g * k1)),
            (Method::ClippedSgda, RegimeCase::Qsm) => Some(2.0 * (-g * p.mu * k1).exp() * r2),
            _ => None,
        }
    }
}

/// `x^((alpha-1)/alpha)`.
fn pow_am1(x: f64, alpha: f64) -> f64 {
    x.powf((alpha - 1.0) / alpha)
}

/// Step-size branch driven by the noise; `+inf` when `sigma = 0`.
fn noise_branch(sigma: f64, value: impl FnOnce() -> f64) -> f64 {
    if sigma == 0.0 {
        f64::INFINITY
    } else {
        value()
    }
}

/// Solves `B = max{2, c / ln^2 B}` for `B >= 2`.
///
/// If `c <= 2 ln^2 2` the answer is 2. Otherwise `B ln^2 B = c` has a unique
/// root above 2; with `u = ln B` it solves `u + 2 ln u = ln c`, a concave
/// increasing equation on which Newton's method started left of the root
/// increases monotonically to it.
pub fn solve_bk(c: f64) -> Result<f64> {
    if c.is_nan() || c < 0.0 {
        return Err(Error::Numerical(format!("invalid B_K coefficient {c}")));
    }
    if c.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let ln2 = std::f64::consts::LN_2;
    if c <= 2.0 * ln2 * ln2 {
        return Ok(2.0);
    }
    let lnc = c.ln();
    let mut u = ln2;
    for _ in 0..200 {
        let h = u + 2.0 * u.ln() - lnc;
        let step = h / (1.0 + 2.0 / u);
        u -= step;
        if step.abs() <= 1e-15 * u.abs().max(1.0) {
            let b = u.exp();
            if (b - c / (u * u)).abs() <= 1e-8 * b {
                return Ok(b.max(2.0));
            }
        }
    }
    Err(Error::Numerical(format!("B_K iteration did not converge for c = {c}")))
}

/// Residual `|B - max{2, c/ln^2 B}| / B` of a candidate solution.
pub fn bk_residual(c: f64, b: f64) -> f64 {
    let rhs = (c / b.ln().powi(2)).max(2.0);
    (b - rhs).abs() / b
}

/// `(K+1)^(2(alpha-1)/alpha) mu^2 scale / (const^(2/alpha) sigma^2 log^(2(alpha-1)/alpha))`.
fn bk_coefficient(p: &ScheduleParams, scale: f64, constant: f64, log: f64) -> f64 {
    if p.sigma == 0.0 {
        return f64::INFINITY;
    }
    let e = 2.0 * (p.alpha - 1.0) / p.alpha;
    (p.horizon_k as f64 + 1.0).powf(e) * p.mu * p.mu * scale
        / (constant.powf(2.0 / p.alpha) * p.sigma * p.sigma * log.powf(e))
}

fn constant_schedule(method: Method, case: RegimeCase, p: &ScheduleParams, gamma: f64, lambda_scale: f64, log_term: f64) -> Schedule {
    Schedule {
        method,
        case,
        gamma,
        lambda_kind: LambdaKind::Constant,
        lambda_scale,
        decay_rate: 0.0,
        a_param: None,
        b_k: None,
        horizon_k: p.horizon_k,
        beta: p.beta,
        log_term,
    }
}

#[allow(clippy::too_many_arguments)]
fn decay_schedule(
    method: Method,
    case: RegimeCase,
    p: &ScheduleParams,
    gamma: f64,
    lambda_scale: f64,
    rate: f64,
    b_k: f64,
    log_term: f64,
) -> Schedule {
    Schedule {
        method,
        case,
        gamma,
        lambda_kind: LambdaKind::ExpDecay,
        lambda_scale,
        decay_rate: rate,
        a_param: None,
        b_k: Some(b_k),
        horizon_k: p.horizon_k,
        beta: p.beta,
        log_term,
    }
}

/// Clipped SGD in the nonconvex, PL, convex and quasi-strongly convex regimes.
pub fn sgd_schedule(case: RegimeCase, p: &ScheduleParams, fidelity: Fidelity) -> Result<Schedule> {
    p.validate()?;
    let c = fidelity.factor()?;
    let ln = p.log_term(4.0)?;
    let (l, a, s) = (p.l, p.alpha, p.sigma);
    let kf = p.horizon_k as f64;
    let m = Method::ClippedSgd;
    match case {
        RegimeCase::Nonconvex => {
            let sd = p.need_delta()?.sqrt();
            let g = (1.0 / (80.0 * l * ln))
                .min(noise_branch(s, || sd / (27f64.powf(1.0 / a) * 20.0 * s * l.sqrt() * kf.powf(1.0 / a) * pow_am1(ln, a))));
            let g = c * g;
            Ok(constant_schedule(m, case, p, g, sd / (20.0 * l.sqrt() * g * ln), ln))
        }
        RegimeCase::Pl => {
            let mu = p.need_mu()?;
            let delta = p.need_delta()?;
            let b = solve_bk(bk_coefficient(p, delta / l, 264600.0, ln))?;
            let g = c * (1.0 / (250.0 * l * ln)).min(b.ln() / (mu * (kf + 1.0)));
            let scale = delta.sqrt() / (120.0 * l.sqrt() * g * ln);
            Ok(decay_schedule(m, case, p, g, scale, mu, b, ln))
        }
        RegimeCase::Convex => {
            let r = p.need_r()?;
            let g = (1.0 / (80.0 * l * ln))
                .min(noise_branch(s, || r / (108f64.powf(1.0 / a) * 20.0 * s * kf.powf(1.0 / a) * pow_am1(ln, a))));
            let g = c * g;
            Ok(constant_schedule(m, case, p, g, r / (40.0 * g * ln), ln))
        }
        RegimeCase::Qsc => {
            let mu = p.need_mu()?;
            let r = p.need_r()?;
            let b = solve_bk(bk_coefficient(p, r * r / 4.0, 5400.0, ln))?;
            let g = c * (1.0 / (800.0 * l * ln)).min(2.0 * b.ln() / (mu * (kf + 1.0)));
            let scale = r / (120.0 * g * ln);
            Ok(decay_schedule(m, case, p, g, scale, mu / 2.0, b, ln))
        }
        other => Err(config(format!("clipped SGD has no {other:?} regime"))),
    }
}

/// `a = max{48600 ln^2(4K/beta), 900 sigma (K+1) K^(1/alpha) ln^((alpha-1)/alpha)(4K/beta) / (L R)}`.
fn sstm_a(l: f64, r: f64, sigma: f64, alpha: f64, k: f64, ln: f64) -> f64 {
    let det = 48600.0 * ln * ln;
    if sigma == 0.0 {
        det
    } else {
        det.max(900.0 * sigma * (k + 1.0) * k.powf(1.0 / alpha) * pow_am1(ln, alpha) / (l * r))
    }
}

/// Clipped similar-triangles method for smooth convex problems.
pub fn sstm_schedule(p: &ScheduleParams, fidelity: Fidelity) -> Result<Schedule> {
    p.validate()?;
    let c = fidelity.factor()?;
    let r = p.need_r()?;
    if p.horizon_k == 0 {
        return Err(config("accelerated method needs K >= 1"));
    }
    let kf = p.horizon_k as f64;
    let ln = check_log((4.0 * kf / p.beta).ln())?;
    let a = sstm_a(p.l, r, p.sigma, p.alpha, kf, ln) / c;
    Ok(Schedule {
        method: Method::ClippedSstm,
        case: RegimeCase::Convex,
        gamma: 1.0 / (2.0 * a * p.l),
        lambda_kind: LambdaKind::InverseAlpha,
        lambda_scale: r / (30.0 * ln),
        decay_rate: 0.0,
        a_param: Some(a),
        b_k: None,
        horizon_k: p.horizon_k,
        beta: p.beta,
        log_term: ln,
    })
}

/// One stage of the restarted accelerated method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartStage {
    pub k_t: usize,
    pub a_t: f64,
    /// `R_{t-1}`, the distance bound at the start of the stage.
    pub r_start: f64,
    /// `R_t = R_{t-1} / sqrt 2`.
    pub r_target: f64,
    pub eps_t: f64,
    /// `R_t / (30 ln(4 K_t tau / beta))`; the stage's clipping level is this
    /// divided by `alpha_{k+1}`.
    pub lambda_scale: f64,
    pub log_term: f64,
}

impl RestartStage {
    pub fn schedule(&self, l: f64, beta: f64) -> Schedule {
        Schedule {
            method: Method::RClippedSstm,
            case: RegimeCase::Qsc,
            gamma: 1.0 / (2.0 * self.a_t * l),
            lambda_kind: LambdaKind::InverseAlpha,
            lambda_scale: self.lambda_scale,
            decay_rate: 0.0,
            a_param: Some(self.a_t),
            b_k: None,
            horizon_k: self.k_t,
            beta,
            log_term: self.log_term,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartPlan {
    pub tau: usize,
    pub stages: Vec<RestartStage>,
    pub l: f64,
    pub beta: f64,
}

impl RestartPlan {
    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.k_t).sum()
    }
}

/// Stage lengths and parameters of the restarted method for reaching
/// `f - f* <= eps` on a `mu`-strongly convex problem.
pub fn restart_plan(l: f64, mu: f64, r: f64, sigma: f64, alpha: f64, eps: f64, beta: f64) -> Result<RestartPlan> {
    if !(l > 0.0 && mu > 0.0 && r > 0.0 && eps > 0.0) {
        return Err(config("restart plan needs L, mu, R, eps > 0"));
    }
    if !(alpha > 1.0 && alpha <= 2.0) || !(beta > 0.0 && beta <= 1.0) || !(sigma >= 0.0) {
        return Err(config("restart plan needs alpha in (1, 2], beta in (0, 1], sigma >= 0"));
    }
    let target = mu * r * r / 2.0;
    if eps >= target {
        return Err(Error::AlreadySolved(format!("eps = {eps} >= mu R^2 / 2 = {target}")));
    }
    let tau = (target / eps).log2().ceil().max(1.0) as usize;
    let tf = tau as f64;
    let mut stages = Vec::with_capacity(tau);
    for t in 1..=tau {
        let r_prev = r / 2f64.powf((t as f64 - 1.0) / 2.0);
        let r_t = r / 2f64.powf(t as f64 / 2.0);
        let eps_t = mu * r_prev * r_prev / 4.0;
        let ratio = (l * r_prev * r_prev / eps_t).sqrt();
        let det = 1080.0 * ratio * (2160.0 * (l * r_prev * r_prev).sqrt() * tf / (eps_t.sqrt() * beta)).ln();
        let sto = if sigma == 0.0 {
            0.0
        } else {
            let q = (5400.0 * sigma * r_prev / eps_t).powf(alpha / (alpha - 1.0));
            2.0 * q * (4.0 * tf / beta * q).ln()
        };
        let k_t = det.max(sto).ceil().max(1.0) as usize;
        let ln = check_log((4.0 * k_t as f64 * tf / beta).ln())?;
        let a_t = sstm_a(l, r_t, sigma, alpha, k_t as f64, ln);
        stages.push(RestartStage {
            k_t,
            a_t,
            r_start: r_prev,
            r_target: r_t,
            eps_t,
            lambda_scale: r_t / (30.0 * ln),
            log_term: ln,
        });
    }
    Ok(RestartPlan { tau, stages, l, beta })
}

/// Clipped stochastic extragradient, monotone and quasi-strongly monotone.
pub fn seg_schedule(case: RegimeCase, p: &ScheduleParams, fidelity: Fidelity) -> Result<Schedule> {
    p.validate()?;
    let c = fidelity.factor()?;
    let ln = p.log_term(6.0)?;
    let r = p.need_r()?;
    let (l, a, s) = (p.l, p.alpha, p.sigma);
    let k1 = p.horizon_k as f64 + 1.0;
    let m = Method::ClippedSeg;
    match case {
        RegimeCase::Monotone => {
            let g = (1.0 / (160.0 * l * ln)).min(noise_branch(s, || {
                20f64.powf((2.0 - a) / a) * r / (10800f64.powf(1.0 / a) * k1.powf(1.0 / a) * s * pow_am1(ln, a))
            }));
            let g = c * g;
            Ok(constant_schedule(m, case, p, g, r / (20.0 * g * ln), ln))
        }
        RegimeCase::Qsm => {
            let mu = p.need_mu()?;
            let b = solve_bk(bk_coefficient(p, r * r, 264600.0, ln))?;
            let g = c * (1.0 / (650.0 * l * ln)).min(b.ln() / (mu * k1));
            Ok(decay_schedule(m, case, p, g, r / (120.0 * g * ln), mu, b, ln))
        }
        other => Err(config(format!("clipped SEG has no {other:?} regime"))),
    }
}

/// Clipped SGDA under star-cocoercivity, optionally with monotonicity or
/// quasi-strong monotonicity. `p.l` is the star-cocoercivity constant.
pub fn sgda_schedule(case: RegimeCase, p: &ScheduleParams, fidelity: Fidelity) -> Result<Schedule> {
    p.validate()?;
    let c = fidelity.factor()?;
    let r = p.need_r()?;
    let (ell, a, s) = (p.l, p.alpha, p.sigma);
    let k1 = p.horizon_k as f64 + 1.0;
    let m = Method::ClippedSgda;
    let constant_case = |ln: f64| -> Schedule {
        let g = (1.0 / (170.0 * ell * ln))
            .min(noise_branch(s, || r / (97200f64.powf(1.0 / a) * k1.powf(1.0 / a) * s * pow_am1(ln, a))));
        let g = c * g;
        constant_schedule(m, case, p, g, r / (60.0 * g * ln), ln)
    };
    match case {
        RegimeCase::MonotoneStarCoco => Ok(constant_case(p.log_term(6.0)?)),
        RegimeCase::StarCoco => Ok(constant_case(p.log_term(4.0)?)),
        RegimeCase::Qsm => {
            let ln = p.log_term(4.0)?;
            let mu = p.need_mu()?;
            let b = solve_bk(bk_coefficient(p, r * r, 5400.0, ln))?;
            let g = c * (1.0 / (400.0 * ell * ln)).min(b.ln() / (mu * k1));
            Ok(decay_schedule(m, case, p, g, r / (120.0 * g * ln), mu, b, ln))
        }
        other => Err(config(format!("clipped SGDA has no {other:?} regime"))),
    }
}

/// Dispatches to the schedule builder for `method`.
pub fn build_schedule(method: Method, case: RegimeCase, p: &ScheduleParams, fidelity: Fidelity) -> Result<Schedule> {
    match method {
        Method::ClippedSgd => sgd_schedule(case, p, fidelity),
        Method::ClippedSstm => sstm_schedule(p, fidelity),
        Method::ClippedSeg => seg_schedule(case, p, fidelity),
        Method::ClippedSgda => sgda_schedule(case, p, fidelity),
        Method::Sgd | Method::RClippedSstm => {
            Err(config(format!("{method:?} is not driven by a single fixed-horizon schedule")))
        }
    }
}

/// Smallest horizon `K <= k_max` for which the quasi-strongly convex clipped
/// SGD guarantee `2 exp(-gamma mu (K+1)/2) R^2` drops to `eps`.
pub fn qsc_horizon_for(p: &ScheduleParams, eps: f64, k_max: usize) -> Result<Option<(usize, Schedule)>> {
    let holds = |k: usize| -> Result<Option<Schedule>> {
        let q = ScheduleParams { horizon_k: k, ..*p };
        match sgd_schedule(RegimeCase::Qsc, &q, Fidelity::Theory) {
            Ok(s) => Ok((s.guarantee(&q).unwrap() <= eps).then_some(s)),
            Err(Error::Hypothesis(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    // The guarantee is not monotone in K in general (the step size switches
    // branches), so scan geometrically for a feasible K and then bisect the
    // last infeasible/feasible bracket.
    let mut lo = 0usize;
    let mut hi = 1usize;
    loop {
        if hi > k_max {
            return Ok(None);
        }
        if holds(hi)?.is_some() {
            break;
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid)?.is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(holds(hi)?.map(|s| (hi, s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn params(sigma: f64, k: usize) -> ScheduleParams {
        ScheduleParams {
            l: 1.0,
            mu: 0.5,
            r: 1.0,
            delta: 1.0,
            sigma,
            alpha: 1.5,
            horizon_k: k,
            beta: 0.05,
        }
    }

    #[test]
    fn convex_noiseless_example() {
        let s = sgd_schedule(RegimeCase::Convex, &params(0.0, 10), Fidelity::Theory).unwrap();
        let ln = 880f64.ln();
        assert!((s.gamma - 1.0 / (80.0 * ln)).abs() < 1e-15);
        assert!((s.lambda(0) - 1.0 / (40.0 * s.gamma * ln)).abs() < 1e-12);
        assert_eq!(s.lambda(0), s.lambda(7));
        assert!((s.log_term - ln).abs() < 1e-15);
    }

    #[test]
    fn qsc_lambda_ratio() {
        let s = sgd_schedule(RegimeCase::Qsc, &params(1.0, 1000), Fidelity::Theory).unwrap();
        for k in [0, 5, 100] {
            let ratio = s.lambda(k + 2) / s.lambda(k);
            assert!((ratio - (-s.gamma * 0.25).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn noiseless_branch_collapse() {
        let p = params(0.0, 99);
        let ln6 = (6.0 * 100.0 / 0.05f64).ln();
        let ln4 = (4.0 * 100.0 / 0.05f64).ln();
        let seg = seg_schedule(RegimeCase::Monotone, &p, Fidelity::Theory).unwrap();
        assert!((seg.gamma - 1.0 / (160.0 * ln6)).abs() < 1e-15);
        assert!((seg.gamma * seg.lambda(3) - 1.0 / (20.0 * ln6)).abs() < 1e-14);
        let sgda = sgda_schedule(RegimeCase::MonotoneStarCoco, &p, Fidelity::Theory).unwrap();
        assert!((sgda.gamma - 1.0 / (170.0 * ln6)).abs() < 1e-15);
        let nc = sgd_schedule(RegimeCase::Nonconvex, &p, Fidelity::Theory).unwrap();
        assert!((nc.gamma - 1.0 / (80.0 * ln4)).abs() < 1e-15);
        let pl = sgd_schedule(RegimeCase::Pl, &p, Fidelity::Theory).unwrap();
        assert_eq!(pl.b_k, Some(f64::INFINITY));
        assert!((pl.gamma - 1.0 / (250.0 * ln4)).abs() < 1e-15);
    }

    #[test]
    fn sgda_qsm_initial_level() {
        let p = params(1.0, 50);
        let s = sgda_schedule(RegimeCase::Qsm, &p, Fidelity::Theory).unwrap();
        let ln4 = (4.0 * 51.0 / 0.05f64).ln();
        let want = (-s.gamma * 0.5).exp() / (120.0 * s.gamma * ln4);
        assert!((s.lambda(0) - want).abs() < 1e-12 * want);
    }

    #[test]
    fn seg_qsm_rate_is_mu() {
        let s = seg_schedule(RegimeCase::Qsm, &params(1.0, 50), Fidelity::Theory).unwrap();
        assert_eq!(s.decay_rate, 0.5);
        assert!((s.lambda(1) / s.lambda(0) - (-s.gamma * 0.25).exp()).abs() < 1e-14);
    }

    #[test]
    fn gamma_lambda_product_independent_of_gamma() {
        for case in [RegimeCase::MonotoneStarCoco, RegimeCase::StarCoco] {
            let t = sgda_schedule(case, &params(1.0, 200), Fidelity::Theory).unwrap();
            let pr = sgda_schedule(case, &params(1.0, 200), Fidelity::Practical { gamma_factor: 20.0 }).unwrap();
            assert!((pr.gamma / t.gamma - 20.0).abs() < 1e-12);
            let (a, b) = (t.gamma * t.lambda(0), pr.gamma * pr.lambda(0));
            assert!((a - b).abs() < 1e-14 * a);
        }
    }

    #[test]
    fn sstm_parameter_a() {
        let s = sstm_schedule(&params(0.0, 100), Fidelity::Theory).unwrap();
        let ln = (400.0 / 0.05f64).ln();
        assert!((s.a_param.unwrap() - 48600.0 * ln * ln).abs() < 1e-8);
        let p = ScheduleParams { sigma: 0.1, alpha: 1.5, ..params(0.0, 100) };
        let s = sstm_schedule(&p, Fidelity::Theory).unwrap();
        let det = 48600.0 * ln * ln;
        let sto = 900.0 * 0.1 * 101.0 * 100f64.powf(1.0 / 1.5) * ln.powf(0.5 / 1.5);
        assert!((s.a_param.unwrap() - det.max(sto)).abs() < 1e-8 * det);
        // lambda_k * alpha_{k+1} is constant.
        let c0 = s.lambda(0) * s.alpha_next(0);
        for k in [1, 10, 99] {
            assert!((s.lambda(k) * s.alpha_next(k) - c0).abs() < 1e-14 * c0);
        }
    }

    #[test]
    fn log_term_hypothesis_and_missing_mu() {
        // ln(m (K+1) / beta) >= ln 4 > 1 for every admissible input.
        let p = ScheduleParams { beta: 1.0, ..params(1.0, 0) };
        let s = sgd_schedule(RegimeCase::Convex, &p, Fidelity::Theory).unwrap();
        assert!((s.log_term - 4f64.ln()).abs() < 1e-15);
        assert!(matches!(check_log(0.5), Err(Error::Hypothesis(_))));
        let q = ScheduleParams { mu: 0.0, ..params(1.0, 10) };
        assert!(matches!(sgd_schedule(RegimeCase::Qsc, &q, Fidelity::Theory), Err(Error::Config(_))));
        assert!(matches!(sgd_schedule(RegimeCase::Pl, &q, Fidelity::Theory), Err(Error::Config(_))));
    }

    #[test]
    fn bk_clamps_and_solves() {
        assert_eq!(solve_bk(0.5).unwrap(), 2.0);
        assert_eq!(solve_bk(0.0).unwrap(), 2.0);
        let mut rng = RngStream::new(8);
        for _ in 0..100 {
            let c = 10f64.powf(-2.0 + 14.0 * rng.uniform());
            let b = solve_bk(c).unwrap();
            assert!(b >= 2.0);
            assert!(bk_residual(c, b) <= 1e-8, "c = {c}, b = {b}");
        }
    }

    #[test]
    fn bk_nonincreasing_in_sigma() {
        let mut prev = f64::INFINITY;
        for i in 1..=40 {
            let p = ScheduleParams { sigma: 0.05 * i as f64, ..params(1.0, 100_000) };
            let s = sgd_schedule(RegimeCase::Qsc, &p, Fidelity::Theory).unwrap();
            let b = s.b_k.unwrap();
            assert!(b <= prev);
            prev = b;
        }
    }

    #[test]
    fn restart_plan_examples() {
        let plan = restart_plan(1.0, 1.0, 1.0, 0.0, 2.0, 0.25, 0.05).unwrap();
        assert_eq!(plan.tau, 1);
        let plan = restart_plan(2.0, 0.5, 2.0, 0.1, 1.5, 1e-3, 0.05).unwrap();
        assert_eq!(plan.tau, (0.5 * 4.0 / 2.0 / 1e-3f64).log2().ceil() as usize);
        for (i, st) in plan.stages.iter().enumerate() {
            assert!((st.eps_t - 0.5 * st.r_start * st.r_start / 4.0).abs() < 1e-15);
            assert!((st.r_target * st.r_target - st.r_start * st.r_start / 2.0).abs() < 1e-12);
            if i > 0 {
                assert!((st.r_start - plan.stages[i - 1].r_target).abs() < 1e-15);
            }
        }
        assert!(matches!(
            restart_plan(1.0, 1.0, 1.0, 0.0, 2.0, 0.5, 0.05),
            Err(Error::AlreadySolved(_))
        ));
    }

    #[test]
    fn schedules_positive_and_bounded_step() {
        let p = params(1.0, 500);
        let all = [
            sgd_schedule(RegimeCase::Convex, &p, Fidelity::Theory).unwrap(),
            sgd_schedule(RegimeCase::Qsc, &p, Fidelity::Theory).unwrap(),
            seg_schedule(RegimeCase::Monotone, &p, Fidelity::Theory).unwrap(),
            seg_schedule(RegimeCase::Qsm, &p, Fidelity::Theory).unwrap(),
            sgda_schedule(RegimeCase::Qsm, &p, Fidelity::Theory).unwrap(),
        ];
        for s in &all {
            assert!(s.gamma > 0.0);
            for k in 0..=p.horizon_k {
                assert!(s.lambda(k) > 0.0);
            }
            assert!(s.gamma * s.lambda(0) <= p.r);
        }
        let nc = sgd_schedule(RegimeCase::Nonconvex, &p, Fidelity::Theory).unwrap();
        assert!(nc.gamma * nc.lambda(0) <= p.delta.sqrt());
    }

    #[test]
    fn deterministic_and_serializable() {
        let p = params(0.7, 300);
        let a = seg_schedule(RegimeCase::Qsm, &p, Fidelity::Theory).unwrap();
        let b = seg_schedule(RegimeCase::Qsm, &p, Fidelity::Theory).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_value(&a).unwrap();
        for key in [
            "method", "case", "gamma", "lambda_kind", "lambda_scale", "decay_rate", "a_param", "b_k", "horizon_k", "beta",
            "log_term",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let back: Schedule = serde_json::from_value(json).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn qsc_horizon_search() {
        let p = ScheduleParams { mu: 1.0, r: 0.09, sigma: 1.0, alpha: 2.0, ..params(1.0, 0) };
        let (k, s) = qsc_horizon_for(&p, 0.01, 1 << 20).unwrap().unwrap();
        let q = ScheduleParams { horizon_k: k, ..p };
        assert!(s.guarantee(&q).unwrap() <= 0.01);
        let prev = ScheduleParams { horizon_k: k - 1, ..p };
        let sp = sgd_schedule(RegimeCase::Qsc, &prev, Fidelity::Theory).unwrap();
        assert!(sp.guarantee(&prev).unwrap() > 0.01);
    }
}
