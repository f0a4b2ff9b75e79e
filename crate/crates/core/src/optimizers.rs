//! The iterative methods: plain and clipped SGD, clipped similar-triangles
//! (with restarts), clipped extragradient, clipped SGDA, and unclipped
//! references for the deterministic limit.
//!
//! All runs are sequential and draw noise from the supplied stream in a fixed
//! order, so a run is a pure function of its inputs and the stream's seed.
//! Inner loops reuse preallocated buffers.

use serde::{Deserialize, Serialize};

use crate::clipping::clip_in_place;
use crate::error::{config, contract, Result};
use crate::metrics::AffineGap;
use crate::noise::NoiseModel;
use crate::problem::{MinProblem, VipClass, VipProblem};
use crate::rng::RngStream;
use crate::schedules::{Method, RegimeCase, RestartPlan, Schedule};
use crate::vector::{dist_sq_slices, DenseVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checkpoints {
    /// `k = 0`, the last step, and every rounded power of `ratio`.
    Geometric { ratio: f64 },
    All,
    /// Only `k = 0` and the last step.
    Ends,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub checkpoints: Checkpoints,
    /// Store every iterate `x^k` (memory grows with the step count).
    pub keep_iterates: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            checkpoints: Checkpoints::Geometric { ratio: 1.1 },
            keep_iterates: false,
        }
    }
}

impl RunOptions {
    pub fn all_checkpoints() -> Self {
        Self {
            checkpoints: Checkpoints::All,
            keep_iterates: false,
        }
    }

    pub fn ends_only() -> Self {
        Self {
            checkpoints: Checkpoints::Ends,
            keep_iterates: false,
        }
    }

    pub fn with_iterates(mut self) -> Self {
        self.keep_iterates = true;
        self
    }
}

/// Sorted, deduplicated checkpoint indices in `0..=steps`.
pub fn checkpoint_indices(steps: usize, policy: Checkpoints) -> Vec<usize> {
    match policy {
        Checkpoints::All => (0..=steps).collect(),
        Checkpoints::Ends if steps == 0 => vec![0],
        Checkpoints::Ends => vec![0, steps],
        Checkpoints::Geometric { ratio } => {
            let ratio = if ratio > 1.0 { ratio } else { 1.1 };
            let mut v = vec![0, steps];
            let mut p = 1.0f64;
            while p.round() as usize <= steps {
                v.push(p.round() as usize);
                p *= ratio;
            }
            v.sort_unstable();
            v.dedup();
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub k: usize,
    /// The regime's convergence metric.
    pub metric: f64,
    pub dist_sq: Option<f64>,
    pub value_gap: Option<f64>,
    /// `||grad f||^2` or `||F||^2` at the current iterate.
    pub grad_sq: Option<f64>,
    /// Mean of `grad_sq` over iterates `0..=k`.
    pub grad_sq_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub k_t: usize,
    pub eps_t: f64,
    pub value_gap: f64,
    pub r_start: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub method: Method,
    pub case: Option<RegimeCase>,
    pub metric_name: String,
    pub checkpoints: Vec<Checkpoint>,
    pub final_metric: f64,
    pub max_dist_from_star: f64,
    pub ball_radius: f64,
    pub left_ball: bool,
    pub oracle_calls: usize,
    pub final_point: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterates: Vec<DenseVector>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageRecord>,
}

impl TrialRecord {
    /// A record with no data, useful as a struct-update base.
    pub fn empty() -> Self {
        Self {
            seed: 0,
            method: Method::Sgd,
            case: None,
            metric_name: String::new(),
            checkpoints: Vec::new(),
            final_metric: f64::NAN,
            max_dist_from_star: 0.0,
            ball_radius: f64::INFINITY,
            left_ball: false,
            oracle_calls: 0,
            final_point: Vec::new(),
            iterates: Vec::new(),
            stages: Vec::new(),
        }
    }

    /// Writes `seed, method, case, k, metric` rows, with a header.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| crate::Error::Numerical(format!("csv write failed: {e}"));
        wr.write_record(["seed", "method", "case", "k", "metric"]).map_err(io)?;
        let case = self.case.map(|c| c.as_str()).unwrap_or("none");
        for c in &self.checkpoints {
            wr.write_record([
                self.seed.to_string(),
                self.method.as_str().to_string(),
                case.to_string(),
                c.k.to_string(),
                format!("{:e}", c.metric),
            ])
            .map_err(io)?;
        }
        wr.flush().map_err(|e| crate::Error::Numerical(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

/// Collects checkpoints, the running distance maximum and ball containment.
struct Recorder {
    due: Vec<usize>,
    next: usize,
    out: Vec<Checkpoint>,
    max_dist_sq: f64,
    ball_sq: f64,
    left: bool,
    keep: bool,
    iterates: Vec<DenseVector>,
}

impl Recorder {
    fn new(steps: usize, opts: &RunOptions, ball: f64) -> Self {
        Self {
            due: checkpoint_indices(steps, opts.checkpoints),
            next: 0,
            out: Vec::new(),
            max_dist_sq: 0.0,
            ball_sq: ball * ball,
            left: false,
            keep: opts.keep_iterates,
            iterates: Vec::new(),
        }
    }

    #[inline]
    fn is_due(&self, k: usize) -> bool {
        self.due.get(self.next) == Some(&k)
    }

    fn push(&mut self, c: Checkpoint) {
        self.next += 1;
        self.out.push(c);
    }

    /// Tracks the distance of a point that must stay in `ball` (the
    /// principal iterate).
    #[inline]
    fn track(&mut self, x: &DenseVector, x_star: &DenseVector) {
        let d = dist_sq_slices(x.as_slice(), x_star.as_slice());
        self.max_dist_sq = self.max_dist_sq.max(d);
        if d > self.ball_sq {
            self.left = true;
        }
        if self.keep {
            self.iterates.push(x.clone());
        }
    }

    /// Tracks an auxiliary point with its own containment radius (squared).
    #[inline]
    fn track_aux(&mut self, x: &DenseVector, x_star: &DenseVector, ball_sq: f64) {
        if dist_sq_slices(x.as_slice(), x_star.as_slice()) > ball_sq {
            self.left = true;
        }
    }

    fn finish(
        self,
        seed: u64,
        method: Method,
        case: Option<RegimeCase>,
        metric_name: &str,
        oracle_calls: usize,
        final_point: &DenseVector,
    ) -> TrialRecord {
        let final_metric = self.out.last().map(|c| c.metric).unwrap_or(f64::NAN);
        TrialRecord {
            seed,
            method,
            case,
            metric_name: metric_name.to_string(),
            checkpoints: self.out,
            final_metric,
            max_dist_from_star: self.max_dist_sq.sqrt(),
            ball_radius: self.ball_sq.sqrt(),
            left_ball: self.left,
            oracle_calls,
            final_point: final_point.as_slice().to_vec(),
            iterates: self.iterates,
            stages: Vec::new(),
        }
    }
}

#[inline]
fn add_noise(g: &mut DenseVector, noise: &NoiseModel, k: usize, buf: &mut [f64], rng: &mut RngStream) -> Result<()> {
    if noise.is_zero() {
        return Ok(());
    }
    noise.sample_into(k, buf, rng)?;
    for (a, b) in g.as_mut_slice().iter_mut().zip(buf.iter()) {
        *a += b;
    }
    Ok(())
}

fn require(schedule: &Schedule, methods: &[Method]) -> Result<()> {
    if methods.contains(&schedule.method) {
        Ok(())
    } else {
        Err(contract(format!("schedule is for {:?}, expected one of {methods:?}", schedule.method)))
    }
}

fn metric_name(method: Method, case: RegimeCase) -> &'static str {
    match (method, case) {
        (_, RegimeCase::Nonconvex) => "grad_norm_sq_mean",
        (Method::ClippedSgd, RegimeCase::Pl) => "value_gap",
        (Method::ClippedSgd, RegimeCase::Convex) => "avg_value_gap",
        (Method::ClippedSstm | Method::RClippedSstm, _) => "value_gap",
        (Method::ClippedSeg, RegimeCase::Monotone) => "gap_avg_extrapolated",
        (Method::ClippedSgda, RegimeCase::MonotoneStarCoco) => "gap_avg",
        (Method::ClippedSgda, RegimeCase::StarCoco) => "operator_norm_sq_mean",
        _ => "dist_sq",
    }
}

/// Plain SGD `x^{k+1} = x^k - gamma (grad f(x^k) + xi^k)`. The metric is
/// `||x^k - x*||^2`.
pub fn run_sgd(
    problem: &MinProblem,
    noise: &NoiseModel,
    gamma: f64,
    steps: usize,
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<TrialRecord> {
    if !(gamma >= 0.0) {
        return Err(contract(format!("step size must be nonnegative, got {gamma}")));
    }
    sgd_loop(problem, noise, gamma, None, steps, opts, rng, Method::Sgd, None)
}

/// Clipped SGD `x^{k+1} = x^k - gamma clip(grad f_xi(x^k), lambda_k)`.
pub fn run_clipped_sgd(
    problem: &MinProblem,
    noise: &NoiseModel,
    schedule: &Schedule,
    steps: usize,
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<TrialRecord> {
    require(schedule, &[Method::ClippedSgd])?;
    sgd_loop(
        problem,
        noise,
        schedule.gamma,
        Some(schedule),
        steps,
        opts,
        rng,
        Method::ClippedSgd,
        Some(schedule.case),
    )
}

#[allow(clippy::too_many_arguments)]
fn sgd_loop(
    problem: &MinProblem,
    noise: &NoiseModel,
    gamma: f64,
    schedule: Option<&Schedule>,
    steps: usize,
    opts: &RunOptions,
    rng: &mut RngStream,
    method: Method,
    case: Option<RegimeCase>,
) -> Result<TrialRecord> {
    noise.validate()?;
    let d = problem.dim();
    let xs = &problem.x_star;
    let mut x = problem.x0.clone();
    let mut xbar = x.clone();
    let mut g = DenseVector::zeros(d);
    let mut buf = vec![0.0; d];
    let mut rec = Recorder::new(steps, opts, 2.0 * problem.radius);
    let mut grad_sum = 0.0;
    let mut tmp = DenseVector::zeros(d);

    let snapshot = |k: usize, x: &DenseVector, xbar: &DenseVector, gsq: f64, grad_sum: f64| -> Checkpoint {
        let dist_sq = dist_sq_slices(x.as_slice(), xs.as_slice());
        let value_gap = problem.value(x) - problem.f_star;
        let mean = grad_sum / (k as f64 + 1.0);
        let metric = match case {
            Some(RegimeCase::Nonconvex) => mean,
            Some(RegimeCase::Pl) => value_gap,
            Some(RegimeCase::Convex) => problem.value(xbar) - problem.f_star,
            _ => dist_sq,
        };
        Checkpoint {
            k,
            metric,
            dist_sq: Some(dist_sq),
            value_gap: Some(value_gap),
            grad_sq: Some(gsq),
            grad_sq_mean: Some(mean),
        }
    };

    rec.track(&x, xs);
    for k in 0..steps {
        problem.gradient_into(&x, &mut g);
        let gsq = g.norm_sq();
        grad_sum += gsq;
        if rec.is_due(k) {
            rec.push(snapshot(k, &x, &xbar, gsq, grad_sum));
        }
        add_noise(&mut g, noise, k, &mut buf, rng)?;
        if let Some(s) = schedule {
            clip_in_place(g.as_mut_slice(), s.lambda(k));
        }
        for (xi, gi) in x.as_mut_slice().iter_mut().zip(g.iter()) {
            *xi -= gamma * gi;
        }
        xbar.running_mean_update(&x, k + 2);
        rec.track(&x, xs);
    }
    problem.gradient_into(&x, &mut tmp);
    let gsq = tmp.norm_sq();
    grad_sum += gsq;
    if rec.is_due(steps) {
        rec.push(snapshot(steps, &x, &xbar, gsq, grad_sum));
    }
    let name = match case {
        Some(c) => metric_name(method, c),
        None => "dist_sq",
    };
    Ok(rec.finish(rng.seed(), method, case, name, steps, &x))
}

/// Coefficients of the similar-triangles method:
/// `alpha_{k+1} = (k+2)/(2aL)`, `A_{k+1} = A_k + alpha_{k+1}`, `A_0 = 0`.
#[derive(Debug, Clone, Copy)]
pub struct SstmCoefficients {
    step: f64,
    k: usize,
    big_a: f64,
}

impl SstmCoefficients {
    pub fn new(a: f64, l: f64) -> Self {
        Self::from_gamma(1.0 / (2.0 * a * l))
    }

    /// From `gamma = 1/(2aL)`.
    pub fn from_gamma(gamma: f64) -> Self {
        Self {
            step: gamma,
            k: 0,
            big_a: 0.0,
        }
    }

    /// Current `A_k`.
    pub fn big_a(&self) -> f64 {
        self.big_a
    }

    /// Closed form `A_k = (k)(k+3)/(4aL)`.
    pub fn closed_form(a: f64, l: f64, k: usize) -> f64 {
        let k = k as f64;
        k * (k + 3.0) / (4.0 * a * l)
    }
}

impl Iterator for SstmCoefficients {
    /// `(alpha_{k+1}, A_k, A_{k+1})`.
    type Item = (f64, f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let alpha = (self.k as f64 + 2.0) * self.step;
        let prev = self.big_a;
        self.big_a = prev + alpha;
        self.k += 1;
        Some((alpha, prev, self.big_a))
    }
}

/// Clipped similar-triangles method from `y^0 = z^0 = x^0`:
/// `x^{k+1} = (A_k y^k + alpha_{k+1} z^k)/A_{k+1}`,
/// `z^{k+1} = z^k - alpha_{k+1} clip(grad f_xi(x^{k+1}), lambda_k)`,
/// `y^{k+1} = (A_k y^k + alpha_{k+1} z^{k+1})/A_{k+1}`.
/// The metric is `f(y^k) - f*`.
pub fn run_clipped_sstm(
    problem: &MinProblem,
    noise: &NoiseModel,
    schedule: &Schedule,
    steps: usize,
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<TrialRecord> {
    require(schedule, &[Method::ClippedSstm, Method::RClippedSstm])?;
    noise.validate()?;
    let mut rec = Recorder::new(steps, opts, 2.0 * problem.radius);
    let y = sstm_stage(problem, noise, schedule, &problem.x0, steps, 0, &mut rec, rng)?;
    Ok(rec.finish(
        rng.seed(),
        schedule.method,
        Some(schedule.case),
        "value_gap",
        steps,
        &y,
    ))
}

/// Runs one clipped-SSTM stage and returns `y^steps`. Checkpoint indices
/// are shifted by `offset`.
#[allow(clippy::too_many_arguments)]
fn sstm_stage(
    problem: &MinProblem,
    noise: &NoiseModel,
    schedule: &Schedule,
    start: &DenseVector,
    steps: usize,
    offset: usize,
    rec: &mut Recorder,
    rng: &mut RngStream,
) -> Result<DenseVector> {
    let d = problem.dim();
    let xs = &problem.x_star;
    let mut x = start.clone();
    let mut y = start.clone();
    let mut z = start.clone();
    let mut g = DenseVector::zeros(d);
    let mut buf = vec![0.0; d];
    let mut coeffs = SstmCoefficients::from_gamma(schedule.gamma);
    let ball_sq = rec.ball_sq;

    let snapshot = |k: usize, y: &DenseVector, g: &mut DenseVector| -> Checkpoint {
        problem.gradient_into(y, g);
        let gsq = g.norm_sq();
        let value_gap = problem.value(y) - problem.f_star;
        Checkpoint {
            k: k + offset,
            metric: value_gap,
            dist_sq: Some(dist_sq_slices(y.as_slice(), xs.as_slice())),
            value_gap: Some(value_gap),
            grad_sq: Some(gsq),
            grad_sq_mean: None,
        }
    };

    rec.track(&y, xs);
    for k in 0..steps {
        if rec.is_due(k + offset) {
            let c = snapshot(k, &y, &mut g);
            rec.push(c);
        }
        let (alpha, a_prev, a_next) = coeffs.next().expect("infinite iterator");
        x.set_combination(a_prev, &y, alpha, &z, a_next);
        problem.gradient_into(&x, &mut g);
        add_noise(&mut g, noise, k, &mut buf, rng)?;
        clip_in_place(g.as_mut_slice(), schedule.lambda(k));
        z.axpy_assign(-alpha, &g);
        for (yi, zi) in y.as_mut_slice().iter_mut().zip(z.iter()) {
            *yi = (a_prev * *yi + alpha * zi) / a_next;
        }
        rec.track(&y, xs);
        rec.track_aux(&x, xs, ball_sq);
        rec.track_aux(&z, xs, ball_sq);
    }
    if rec.is_due(steps + offset) {
        let c = snapshot(steps, &y, &mut g);
        rec.push(c);
    }
    Ok(y)
}

/// Restarted clipped-SSTM: stage `t` runs `K_t` steps from the previous
/// stage's output. Per-stage value gaps are recorded next to their targets
/// `eps_t`; the ball check uses `2 R_{t-1}` within stage `t`.
pub fn run_r_clipped_sstm(
    problem: &MinProblem,
    noise: &NoiseModel,
    plan: &RestartPlan,
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<TrialRecord> {
    if !(problem.mu_sc > 0.0) {
        return Err(config("restarted method needs a strongly convex problem"));
    }
    noise.validate()?;
    let total = plan.total_iterations();
    let mut start = problem.x0.clone();
    let mut offset = 0;
    let mut stages = Vec::with_capacity(plan.tau);
    let mut checkpoints = Vec::new();
    let mut max_dist: f64 = 0.0;
    let mut left = false;
    let mut iterates = Vec::new();
    for (i, st) in plan.stages.iter().enumerate() {
        let schedule = st.schedule(plan.l, plan.beta);
        let mut rec = Recorder::new(st.k_t, opts, 2.0 * st.r_start);
        // Indices are stage-local; shift after the stage.
        let y = sstm_stage(problem, noise, &schedule, &start, st.k_t, 0, &mut rec, rng)?;
        max_dist = max_dist.max(rec.max_dist_sq.sqrt());
        left |= rec.left;
        let skip_first = i > 0;
        for (j, mut c) in rec.out.into_iter().enumerate() {
            if skip_first && j == 0 {
                continue;
            }
            c.k += offset;
            checkpoints.push(c);
        }
        if opts.keep_iterates {
            iterates.extend(rec.iterates);
        }
        stages.push(StageRecord {
            stage: i + 1,
            k_t: st.k_t,
            eps_t: st.eps_t,
            value_gap: problem.value(&y) - problem.f_star,
            r_start: st.r_start,
        });
        offset += st.k_t;
        start = y;
    }
    let final_metric = problem.value(&start) - problem.f_star;
    Ok(TrialRecord {
        seed: rng.seed(),
        method: Method::RClippedSstm,
        case: Some(RegimeCase::Qsc),
        metric_name: "value_gap".into(),
        checkpoints,
        final_metric,
        max_dist_from_star: max_dist,
        ball_radius: 2.0 * problem.radius,
        left_ball: left,
        oracle_calls: total,
        final_point: start.into_vec(),
        iterates,
        stages,
    })
}

fn vip_gap(problem: &VipProblem, needed: bool) -> Result<Option<AffineGap>> {
    if needed {
        Ok(Some(AffineGap::new(&problem.matrix, &problem.x_star, problem.radius)?))
    } else {
        Ok(None)
    }
}

/// Clipped stochastic extragradient with two independent draws per step:
/// `x~^k = x^k - gamma clip(F_xi1(x^k), lambda_k)`,
/// `x^{k+1} = x^k - gamma clip(F_xi2(x~^k), lambda_k)`.
/// Monotone metric: `Gap_R` of the average of `x~^0..x~^{k-1}`; quasi-strongly
/// monotone metric: `||x^k - x*||^2`.
pub fn run_clipped_seg(
    problem: &VipProblem,
    noise: &NoiseModel,
    schedule: &Schedule,
    steps: usize,
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<TrialRecord> {
    require(schedule, &[Method::ClippedSeg])?;
    seg_loop(problem, noise, schedule.gamma, Some(schedule), steps, opts, rng)
}

/// Unclipped stochastic extragradient with the same draw order.
pub fn run_extragradient(
    problem: &VipProblem,
    noise: &NoiseModel,
    gamma: f64,
    steps: usize,
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<TrialRecord> {
    seg_loop(problem, noise, gamma, None, steps, opts, rng)
}

fn seg_loop(
    problem: &VipProblem,
    noise: &NoiseModel,
    gamma: f64,
    schedule: Option<&Schedule>,
    steps: usize,
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<TrialRecord> {
    noise.validate()?;
    let case = schedule.map(|s| s.case);
    let gap = vip_gap(problem, case == Some(RegimeCase::Monotone))?;
    let d = problem.dim();
    let xs = &problem.x_star;
    let r = problem.radius;
    let mut x = problem.x0.clone();
    let mut xt = x.clone();
    let mut xt_avg = x.clone();
    let mut g = DenseVector::zeros(d);
    let mut buf = vec![0.0; d];
    let mut rec = Recorder::new(steps, opts, 3.0 * r);
    let mut op_sum = 0.0;
    let aux_sq = 16.0 * r * r;

    let snapshot = |k: usize, x: &DenseVector, avg: &DenseVector, fsq: f64, op_sum: f64| -> Checkpoint {
        let dist_sq = dist_sq_slices(x.as_slice(), xs.as_slice());
        let metric = match &gap {
            Some(gp) => gp.eval(avg),
            None => dist_sq,
        };
        Checkpoint {
            k,
            metric,
            dist_sq: Some(dist_sq),
            value_gap: None,
            grad_sq: Some(fsq),
            grad_sq_mean: Some(op_sum / (k as f64 + 1.0)),
        }
    };

    rec.track(&x, xs);
    for k in 0..steps {
        problem.operator_into(&x, &mut g);
        let fsq = g.norm_sq();
        op_sum += fsq;
        if rec.is_due(k) {
            rec.push(snapshot(k, &x, &xt_avg, fsq, op_sum));
        }
        add_noise(&mut g, noise, k, &mut buf, rng)?;
        if let Some(s) = schedule {
            clip_in_place(g.as_mut_slice(), s.lambda(k));
        }
        for ((t, xi), gi) in xt.as_mut_slice().iter_mut().zip(x.iter()).zip(g.iter()) {
            *t = xi - gamma * gi;
        }
        if k == 0 {
            xt_avg.copy_from(&xt);
        } else {
            xt_avg.running_mean_update(&xt, k + 1);
        }
        rec.track_aux(&xt, xs, aux_sq);
        problem.operator_into(&xt, &mut g);
        add_noise(&mut g, noise, k, &mut buf, rng)?;
        if let Some(s) = schedule {
            clip_in_place(g.as_mut_slice(), s.lambda(k));
        }
        for (xi, gi) in x.as_mut_slice().iter_mut().zip(g.iter()) {
            *xi -= gamma * gi;
        }
        rec.track(&x, xs);
    }
    problem.operator_into(&x, &mut g);
    let fsq = g.norm_sq();
    op_sum += fsq;
    if rec.is_due(steps) {
        rec.push(snapshot(steps, &x, &xt_avg, fsq, op_sum));
    }
    let (method, name) = match case {
        Some(c) => (Method::ClippedSeg, metric_name(Method::ClippedSeg, c)),
        None => (Method::ClippedSeg, "dist_sq"),
    };
    Ok(rec.finish(rng.seed(), method, case, name, 2 * steps, &x))
}

/// Clipped SGDA `x^{k+1} = x^k - gamma clip(F_xi(x^k), lambda_k)`.
/// Metrics: `Gap_R` of the average of `x^0..x^k` (monotone + star-cocoercive),
/// mean of `||F(x^j)||^2` (star-cocoercive), `||x^k - x*||^2` (quasi-strongly
/// monotone).
pub fn run_clipped_sgda(
    problem: &VipProblem,
    noise: &NoiseModel,
    schedule: &Schedule,
    steps: usize,
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<TrialRecord> {
    require(schedule, &[Method::ClippedSgda])?;
    if !problem.has(VipClass::StarCocoercive) {
        return Err(config("clipped SGDA needs a star-cocoercive operator"));
    }
    gda_loop(problem, noise, schedule.gamma, Some(schedule), steps, opts, rng)
}

/// Unclipped forward iteration `x^{k+1} = x^k - gamma F_xi(x^k)`.
pub fn run_gda(
    problem: &VipProblem,
    noise: &NoiseModel,
    gamma: f64,
    steps: usize,
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<TrialRecord> {
    gda_loop(problem, noise, gamma, None, steps, opts, rng)
}

fn gda_loop(
    problem: &VipProblem,
    noise: &NoiseModel,
    gamma: f64,
    schedule: Option<&Schedule>,
    steps: usize,
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<TrialRecord> {
    noise.validate()?;
    let case = schedule.map(|s| s.case);
    let gap = vip_gap(problem, case == Some(RegimeCase::MonotoneStarCoco))?;
    let d = problem.dim();
    let xs = &problem.x_star;
    let ball = if case == Some(RegimeCase::MonotoneStarCoco) { 3.0 } else { 2.0 } * problem.radius;
    let mut x = problem.x0.clone();
    let mut avg = x.clone();
    let mut g = DenseVector::zeros(d);
    let mut buf = vec![0.0; d];
    let mut rec = Recorder::new(steps, opts, ball);
    let mut op_sum = 0.0;

    let snapshot = |k: usize, x: &DenseVector, avg: &DenseVector, fsq: f64, op_sum: f64| -> Checkpoint {
        let dist_sq = dist_sq_slices(x.as_slice(), xs.as_slice());
        let mean = op_sum / (k as f64 + 1.0);
        let metric = match case {
            Some(RegimeCase::MonotoneStarCoco) => gap.as_ref().map(|gp| gp.eval(avg)).unwrap_or(f64::NAN),
            Some(RegimeCase::StarCoco) => mean,
            _ => dist_sq,
        };
        Checkpoint {
            k,
            metric,
            dist_sq: Some(dist_sq),
            value_gap: None,
            grad_sq: Some(fsq),
            grad_sq_mean: Some(mean),
        }
    };

    rec.track(&x, xs);
    for k in 0..steps {
        problem.operator_into(&x, &mut g);
        let fsq = g.norm_sq();
        op_sum += fsq;
        if rec.is_due(k) {
            rec.push(snapshot(k, &x, &avg, fsq, op_sum));
        }
        add_noise(&mut g, noise, k, &mut buf, rng)?;
        if let Some(s) = schedule {
            clip_in_place(g.as_mut_slice(), s.lambda(k));
        }
        for (xi, gi) in x.as_mut_slice().iter_mut().zip(g.iter()) {
            *xi -= gamma * gi;
        }
        avg.running_mean_update(&x, k + 2);
        rec.track(&x, xs);
    }
    problem.operator_into(&x, &mut g);
    let fsq = g.norm_sq();
    op_sum += fsq;
    if rec.is_due(steps) {
        rec.push(snapshot(steps, &x, &avg, fsq, op_sum));
    }
    let name = case.map(|c| metric_name(Method::ClippedSgda, c)).unwrap_or("dist_sq");
    Ok(rec.finish(rng.seed(), Method::ClippedSgda, case, name, steps, &x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseModel;
    use crate::problems::{
        make_cocoercive_affine_vip, make_counterexample_1d, make_quadratic_min, make_skew_bilinear,
        make_strong_affine_vip,
    };
    use crate::schedules::{
        build_schedule, restart_plan, sgd_schedule, Fidelity, LambdaKind, ScheduleParams,
    };
    use proptest::prelude::*;

    fn constant_schedule(method: Method, case: RegimeCase, gamma: f64, lambda: f64) -> Schedule {
        Schedule {
            method,
            case,
            gamma,
            lambda_kind: LambdaKind::Constant,
            lambda_scale: lambda,
            decay_rate: 0.0,
            a_param: None,
            b_k: None,
            horizon_k: 0,
            beta: 1.0,
            log_term: 1.0,
        }
    }

    fn params(l: f64, mu: f64, r: f64, sigma: f64, k: usize) -> ScheduleParams {
        ScheduleParams {
            l,
            mu,
            r,
            delta: 0.5 * l * r * r,
            sigma,
            alpha: 1.5,
            horizon_k: k,
            beta: 0.05,
        }
    }

    #[test]
    fn checkpoint_grid() {
        let g = checkpoint_indices(100, Checkpoints::Geometric { ratio: 1.1 });
        assert_eq!(g[0], 0);
        assert_eq!(*g.last().unwrap(), 100);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.contains(&1) && g.contains(&2));
        assert_eq!(checkpoint_indices(3, Checkpoints::All), vec![0, 1, 2, 3]);
        assert_eq!(checkpoint_indices(0, Checkpoints::default_geometric()), vec![0]);
    }

    impl Checkpoints {
        fn default_geometric() -> Self {
            Checkpoints::Geometric { ratio: 1.1 }
        }
    }

    #[test]
    fn sstm_closed_form() {
        for &(a, l) in &[(1.0, 1.0), (48600.0, 3.0), (0.7, 1e-3)] {
            let mut c = SstmCoefficients::new(a, l);
            for k in 0..=10_000usize {
                let (alpha, _, big_a) = c.next().unwrap();
                let exact = (k as f64 + 1.0) * (k as f64 + 4.0) / (4.0 * a * l);
                assert!(((big_a - exact) / exact).abs() <= 1e-9, "k = {k}");
                assert!(big_a >= a * l * alpha * alpha * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn newton_step_on_isotropic_quadratic() {
        let mut rng = RngStream::new(1);
        let p = make_quadratic_min(4, 2.0, 2.0, None, None, None, &mut rng).unwrap();
        let opts = RunOptions::all_checkpoints().with_iterates();
        let rec = run_sgd(&p, &NoiseModel::none(), 0.5, 1, &opts, &mut rng).unwrap();
        let d = DenseVector::new(rec.final_point.clone()).unwrap().distance(&p.x_star).unwrap();
        assert!(d < 1e-15);
    }

    #[test]
    fn zero_step_stays_put() {
        let mut rng = RngStream::new(2);
        let p = make_quadratic_min(3, 0.5, 2.0, None, None, None, &mut rng).unwrap();
        let noise = NoiseModel::heavy_tail(1.0, 1.5, None).unwrap();
        let rec = run_sgd(&p, &noise, 0.0, 20, &RunOptions::default().with_iterates(), &mut rng).unwrap();
        assert!(rec.iterates.iter().all(|x| x == &p.x0));
    }

    #[test]
    fn counterexample_contraction() {
        let p = make_counterexample_1d(1.0, 0.3).unwrap();
        let gamma = 0.1;
        let opts = RunOptions::all_checkpoints().with_iterates();
        let rec = run_sgd(&p, &NoiseModel::none(), gamma, 30, &opts, &mut RngStream::new(0)).unwrap();
        for (k, x) in rec.iterates.iter().enumerate() {
            let exact = 0.9f64.powi(k as i32) * 0.3;
            assert!((x[0] - exact).abs() <= 1e-15);
        }
    }

    #[test]
    fn inactive_clipping_matches_sgd_bitwise() {
        let mut rng = RngStream::new(3);
        let p = make_quadratic_min(5, 0.1, 1.0, None, None, None, &mut rng).unwrap();
        let opts = RunOptions::default().with_iterates();
        let s = constant_schedule(Method::ClippedSgd, RegimeCase::Qsc, 0.3, 1e6);
        let a = run_clipped_sgd(&p, &NoiseModel::none(), &s, 200, &opts, &mut RngStream::new(9)).unwrap();
        let b = run_sgd(&p, &NoiseModel::none(), 0.3, 200, &opts, &mut RngStream::new(9)).unwrap();
        assert_eq!(a.iterates, b.iterates);
    }

    #[test]
    fn inactive_clipping_matches_references_for_vips() {
        let mut rng = RngStream::new(4);
        let opts = RunOptions::default().with_iterates();
        let p = make_skew_bilinear(4, 1.0, None, None, &mut rng).unwrap();
        let s = constant_schedule(Method::ClippedSeg, RegimeCase::Monotone, 0.5, 1e6);
        let a = run_clipped_seg(&p, &NoiseModel::none(), &s, 100, &opts, &mut RngStream::new(1)).unwrap();
        let b = run_extragradient(&p, &NoiseModel::none(), 0.5, 100, &opts, &mut RngStream::new(1)).unwrap();
        assert_eq!(a.iterates, b.iterates);

        let q = make_cocoercive_affine_vip(3, 2.0, None, None, None, &mut rng).unwrap();
        let s = constant_schedule(Method::ClippedSgda, RegimeCase::Qsm, 0.4, 1e6);
        let a = run_clipped_sgda(&q, &NoiseModel::none(), &s, 100, &opts, &mut RngStream::new(1)).unwrap();
        let b = run_gda(&q, &NoiseModel::none(), 0.4, 100, &opts, &mut RngStream::new(1)).unwrap();
        assert_eq!(a.iterates, b.iterates);
    }

    #[test]
    fn step_length_bounded_by_gamma_lambda() {
        let mut rng = RngStream::new(5);
        let p = make_quadratic_min(3, 0.1, 1.0, None, None, None, &mut rng).unwrap();
        let noise = NoiseModel::heavy_tail(5.0, 1.2, None).unwrap();
        let (gamma, lambda) = (0.2, 0.05);
        let s = constant_schedule(Method::ClippedSgd, RegimeCase::Qsc, gamma, lambda);
        let rec = run_clipped_sgd(&p, &noise, &s, 500, &RunOptions::default().with_iterates(), &mut rng).unwrap();
        for w in rec.iterates.windows(2) {
            assert!(w[1].distance(&w[0]).unwrap() <= gamma * lambda * (1.0 + 1e-12));
        }
        let q = make_cocoercive_affine_vip(3, 1.0, None, None, None, &mut rng).unwrap();
        let s = constant_schedule(Method::ClippedSgda, RegimeCase::Qsm, gamma, lambda);
        let rec = run_clipped_sgda(&q, &noise, &s, 500, &RunOptions::default().with_iterates(), &mut rng).unwrap();
        for w in rec.iterates.windows(2) {
            assert!(w[1].distance(&w[0]).unwrap() <= gamma * lambda * (1.0 + 1e-12));
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let mut rng = RngStream::new(6);
        let p = make_quadratic_min(4, 0.1, 1.0, None, None, None, &mut rng).unwrap();
        let noise = NoiseModel::heavy_tail(1.0, 1.5, None).unwrap();
        let s = sgd_schedule(RegimeCase::Convex, &params(1.0, 0.0, p.radius, 1.0, 200), Fidelity::Theory).unwrap();
        let a = run_clipped_sgd(&p, &noise, &s, 200, &RunOptions::default(), &mut RngStream::new(42)).unwrap();
        let b = run_clipped_sgd(&p, &noise, &s, 200, &RunOptions::default(), &mut RngStream::new(42)).unwrap();
        assert_eq!(a, b);
        let c = run_clipped_sgd(&p, &noise, &s, 200, &RunOptions::default(), &mut RngStream::new(43)).unwrap();
        assert_ne!(a.final_point, c.final_point);
    }

    #[test]
    fn convex_bound_deterministic() {
        let mut rng = RngStream::new(7);
        let p = make_quadratic_min(5, 0.0, 1.0, None, None, None, &mut rng).unwrap();
        for k in [10, 100, 1000] {
            let pr = params(1.0, 0.0, p.radius, 0.0, k);
            let s = sgd_schedule(RegimeCase::Convex, &pr, Fidelity::Theory).unwrap();
            let rec = run_clipped_sgd(&p, &NoiseModel::none(), &s, k, &RunOptions::default(), &mut rng).unwrap();
            assert!(rec.final_metric <= s.guarantee(&pr).unwrap(), "K = {k}");
            assert!(!rec.left_ball);
        }
    }

    #[test]
    fn sstm_first_point_and_bound() {
        let mut rng = RngStream::new(8);
        let p = make_quadratic_min(5, 0.0, 2.0, None, None, None, &mut rng).unwrap();
        for k in [10, 100, 1000] {
            let pr = params(2.0, 0.0, p.radius, 0.0, k);
            let s = build_schedule(Method::ClippedSstm, RegimeCase::Convex, &pr, Fidelity::Theory).unwrap();
            let rec = run_clipped_sstm(&p, &NoiseModel::none(), &s, k, &RunOptions::default(), &mut rng).unwrap();
            let bound = s.guarantee(&pr).unwrap();
            assert!(rec.final_metric <= bound, "K = {k}: {} > {bound}", rec.final_metric);
        }
        // One step from x^0: x^1 = z^0 = x^0, so the gradient is taken at x^0.
        let s = constant_schedule(Method::ClippedSstm, RegimeCase::Convex, 0.1, 1e9);
        let rec = run_clipped_sstm(&p, &NoiseModel::none(), &s, 1, &RunOptions::default(), &mut rng).unwrap();
        let g = p.gradient(&p.x0);
        // alpha_1 = 2 gamma, A_1 = alpha_1, y^1 = z^1 = x^0 - alpha_1 g.
        let mut expect = p.x0.clone();
        expect.axpy_assign(-0.2, &g);
        for (a, b) in rec.final_point.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn restarts_meet_stage_targets() {
        let mut rng = RngStream::new(9);
        let p = make_quadratic_min(3, 0.5, 1.0, None, None, None, &mut rng).unwrap();
        let eps = 0.5 * p.mu_sc * p.radius * p.radius / 16.0;
        let plan = restart_plan(1.0, p.mu_sc, p.radius, 0.0, 2.0, eps, 0.1).unwrap();
        let rec = run_r_clipped_sstm(&p, &NoiseModel::none(), &plan, &RunOptions::default(), &mut rng).unwrap();
        assert_eq!(rec.stages.len(), plan.tau);
        for st in &rec.stages {
            assert!(st.value_gap <= st.eps_t, "stage {}: {} > {}", st.stage, st.value_gap, st.eps_t);
        }
        assert_eq!(rec.oracle_calls, plan.total_iterations());
        assert!(rec.checkpoints.windows(2).all(|w| w[0].k < w[1].k));
        assert_eq!(rec.checkpoints.last().unwrap().k, plan.total_iterations());
    }

    #[test]
    fn single_restart_equals_plain_run() {
        let mut rng = RngStream::new(10);
        let p = make_quadratic_min(3, 0.5, 1.0, None, None, None, &mut rng).unwrap();
        let eps = 0.5 * p.mu_sc * p.radius * p.radius * 0.75;
        let plan = restart_plan(1.0, p.mu_sc, p.radius, 0.0, 2.0, eps, 0.1).unwrap();
        assert_eq!(plan.tau, 1);
        let a = run_r_clipped_sstm(&p, &NoiseModel::none(), &plan, &RunOptions::default(), &mut RngStream::new(1)).unwrap();
        let s = plan.stages[0].schedule(plan.l, plan.beta);
        let b = run_clipped_sstm(&p, &NoiseModel::none(), &s, plan.stages[0].k_t, &RunOptions::default(), &mut RngStream::new(1))
            .unwrap();
        assert_eq!(a.final_point, b.final_point);
    }

    #[test]
    fn seg_contracts_and_counts_calls() {
        let mut rng = RngStream::new(11);
        let l = 2.0;
        let p = make_skew_bilinear(4, l, None, None, &mut rng).unwrap();
        let gamma = 1.0 / (2f64.sqrt() * l);
        let rec = run_extragradient(&p, &NoiseModel::none(), gamma, 50, &RunOptions::default().with_iterates(), &mut rng)
            .unwrap();
        let d: Vec<f64> = rec.iterates.iter().map(|x| x.distance(&p.x_star).unwrap()).collect();
        assert!(d.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        assert_eq!(rec.oracle_calls, 100);

        let mut at_star = p.clone();
        at_star.x0 = p.x_star.clone();
        let s = constant_schedule(Method::ClippedSeg, RegimeCase::Qsm, gamma, 1.0);
        let rec = run_clipped_seg(&at_star, &NoiseModel::none(), &s, 20, &RunOptions::default(), &mut rng).unwrap();
        assert_eq!(rec.final_point, p.x_star.as_slice());
    }

    #[test]
    fn seg_monotone_gap_decreases_without_noise() {
        let mut rng = RngStream::new(12);
        let p = make_skew_bilinear(2, 1.0, None, None, &mut rng).unwrap();
        let k = 200;
        let pr = params(1.0, 0.0, p.radius, 0.0, k);
        let s = build_schedule(Method::ClippedSeg, RegimeCase::Monotone, &pr, Fidelity::Theory).unwrap();
        let rec = run_clipped_seg(&p, &NoiseModel::none(), &s, k + 1, &RunOptions::default(), &mut rng).unwrap();
        assert!(rec.final_metric <= s.guarantee(&pr).unwrap());
        assert!(rec.final_metric < rec.checkpoints[0].metric);
    }

    #[test]
    fn sgda_contracts_and_meets_qsm_bound() {
        let mut rng = RngStream::new(13);
        let p = make_cocoercive_affine_vip(4, 2.0, Some(0.5), None, None, &mut rng).unwrap();
        let rec = run_gda(&p, &NoiseModel::none(), 0.5, 50, &RunOptions::default().with_iterates(), &mut rng).unwrap();
        let d: Vec<f64> = rec.iterates.iter().map(|x| x.distance(&p.x_star).unwrap()).collect();
        assert!(d.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        for k in [10, 100, 1000] {
            let mut pr = params(2.0, p.mu_qsm, p.radius, 0.0, k);
            pr.l = p.ell_coco;
            let s = build_schedule(Method::ClippedSgda, RegimeCase::Qsm, &pr, Fidelity::Theory).unwrap();
            let rec = run_clipped_sgda(&p, &NoiseModel::none(), &s, k + 1, &RunOptions::default(), &mut rng).unwrap();
            assert!(rec.final_metric <= s.guarantee(&pr).unwrap(), "K = {k}");
        }
    }

    #[test]
    fn sgda_rejects_non_cocoercive() {
        let mut rng = RngStream::new(14);
        let p = make_strong_affine_vip(2, 0.5, 1.0, None, None, &mut rng).unwrap();
        let s = constant_schedule(Method::ClippedSgda, RegimeCase::Qsm, 0.1, 1.0);
        assert!(run_clipped_sgda(&p, &NoiseModel::none(), &s, 5, &RunOptions::default(), &mut rng).is_err());
        let s = constant_schedule(Method::ClippedSgd, RegimeCase::Qsm, 0.1, 1.0);
        assert!(run_clipped_seg(&p, &NoiseModel::none(), &s, 5, &RunOptions::default(), &mut rng).is_err());
    }

    #[test]
    fn csv_rows() {
        let mut rng = RngStream::new(15);
        let p = make_quadratic_min(2, 0.5, 1.0, None, None, None, &mut rng).unwrap();
        let rec = run_sgd(&p, &NoiseModel::none(), 0.5, 3, &RunOptions::all_checkpoints(), &mut rng).unwrap();
        let mut out = Vec::new();
        rec.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "seed,method,case,k,metric");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with(&format!("{},sgd,none,0,", rec.seed)));
    }

    #[test]
    fn record_invariants() {
        let mut rng = RngStream::new(16);
        let p = make_quadratic_min(3, 0.1, 1.0, None, None, None, &mut rng).unwrap();
        let noise = NoiseModel::gaussian(0.5).unwrap();
        let rec = run_sgd(&p, &noise, 0.1, 1000, &RunOptions::default(), &mut rng).unwrap();
        assert!(rec.checkpoints.windows(2).all(|w| w[0].k < w[1].k));
        assert_eq!(rec.final_metric, rec.checkpoints.last().unwrap().metric);
        let json = serde_json::to_string(&rec).unwrap();
        let back: TrialRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.checkpoints.len(), rec.checkpoints.len());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn sstm_coefficients_sum_to_one(a in 0.1f64..1e4, l in 1e-3f64..1e3, k in 0usize..500) {
            let mut c = SstmCoefficients::new(a, l);
            let (alpha, prev, next) = c.nth(k).unwrap();
            prop_assert!(((prev + alpha) / next - 1.0).abs() < 1e-12);
            prop_assert!(next >= a * l * alpha * alpha * (1.0 - 1e-12));
        }

        #[test]
        fn clipped_sgd_step_bound(seed in 0u64..1000, lambda in 1e-3f64..10.0) {
            let mut rng = RngStream::new(seed);
            let p = make_quadratic_min(2, 0.5, 1.0, None, None, None, &mut rng).unwrap();
            let noise = NoiseModel::heavy_tail(2.0, 1.3, None).unwrap();
            let s = constant_schedule(Method::ClippedSgd, RegimeCase::Qsc, 0.5, lambda);
            let rec = run_clipped_sgd(&p, &noise, &s, 30, &RunOptions::default().with_iterates(), &mut rng).unwrap();
            for w in rec.iterates.windows(2) {
                prop_assert!(w[1].distance(&w[0]).unwrap() <= 0.5 * lambda * (1.0 + 1e-12));
            }
        }
    }
}
