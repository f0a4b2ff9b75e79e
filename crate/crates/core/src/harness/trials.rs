use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::quantile::quantile_with_ci;
use super::report::{KSummary, QuantileReport, SkippedK};
use crate::error::{config, Error, Result};
use crate::noise::NoiseModel;
use crate::optimizers::{
    run_clipped_seg, run_clipped_sgd, run_clipped_sgda, run_clipped_sstm, run_r_clipped_sstm, run_sgd, RunOptions,
    TrialRecord,
};
use crate::problems::Problem;
use crate::rng::RngStream;
use crate::schedules::{build_schedule, restart_plan, Method, RegimeCase, RestartPlan, Schedule, ScheduleParams};

/// Stream label for the problem instance (trial streams are keyed by `K`).
const PROBLEM_LABEL: u64 = u64::MAX;

/// Number of updates a run needs so that its final metric is the quantity a
/// horizon-`K` guarantee bounds: `K + 1` when the bound is on `x^{K+1}` or
/// averages `K + 1` extrapolation points, `K` otherwise.
pub fn steps_for(method: Method, case: RegimeCase, k: usize) -> usize {
    match (method, case) {
        (Method::ClippedSgd, RegimeCase::Pl | RegimeCase::Qsc) => k + 1,
        (Method::ClippedSeg, _) => k + 1,
        (Method::ClippedSgda, RegimeCase::Qsm) => k + 1,
        _ => k,
    }
}

/// Builds the instance shared by every trial of an experiment.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    cfg.problem.build(&mut RngStream::new(cfg.seed_base).child(PROBLEM_LABEL))
}

/// Stream for trial `i` at horizon `k`; independent of execution order.
pub fn trial_stream(seed_base: u64, k: usize, i: usize) -> RngStream {
    RngStream::new(seed_base).child_path(&[k as u64, i as u64])
}

/// Schedule constants taken from the instance and noise, then overridden.
pub fn schedule_params(cfg: &ExperimentConfig, problem: &Problem, k: usize) -> ScheduleParams {
    let (l, mu, delta) = match problem {
        Problem::Min(p) => {
            let mu = match cfg.case {
                RegimeCase::Pl => p.mu_pl,
                _ => p.mu_sc,
            };
            (p.lipschitz_l, mu, p.initial_gap())
        }
        Problem::Vip(p) => {
            let l = if cfg.method == Method::ClippedSgda { p.ell_coco } else { p.lipschitz_l };
            (l, p.mu_qsm, 0.0)
        }
    };
    let o = &cfg.constants;
    ScheduleParams {
        l: o.l.unwrap_or(l),
        mu: o.mu.unwrap_or(mu),
        r: o.r.unwrap_or(problem.radius()),
        delta: o.delta.unwrap_or(delta),
        sigma: o.sigma.unwrap_or(if cfg.noise.is_zero() { 0.0 } else { cfg.noise.sigma }),
        alpha: cfg.noise.alpha,
        horizon_k: k,
        beta: cfg.beta,
    }
}

pub fn restart_plan_for(cfg: &ExperimentConfig, problem: &Problem) -> Result<RestartPlan> {
    let p = schedule_params(cfg, problem, 0);
    let eps = cfg.epsilon.ok_or_else(|| config("restarts need epsilon"))?;
    restart_plan(p.l, p.mu, p.r, p.sigma, p.alpha, eps, p.beta)
}

/// What a single run executes.
#[derive(Debug, Clone)]
pub enum RunPlan {
    Plain { gamma: f64, steps: usize },
    Scheduled { schedule: Schedule, steps: usize },
    Restarted(RestartPlan),
}

impl RunPlan {
    pub fn steps(&self) -> usize {
        match self {
            RunPlan::Plain { steps, .. } | RunPlan::Scheduled { steps, .. } => *steps,
            RunPlan::Restarted(p) => p.total_iterations(),
        }
    }
}

/// The plan for horizon `k`, or the schedule's hypothesis error.
pub fn plan_for(cfg: &ExperimentConfig, problem: &Problem, k: usize) -> Result<RunPlan> {
    match cfg.method {
        Method::Sgd => Ok(RunPlan::Plain {
            gamma: cfg.gamma.ok_or_else(|| config("plain SGD needs gamma"))?,
            steps: k,
        }),
        Method::RClippedSstm => Ok(RunPlan::Restarted(restart_plan_for(cfg, problem)?)),
        m => {
            let p = schedule_params(cfg, problem, k);
            let schedule = build_schedule(m, cfg.case, &p, cfg.fidelity)?;
            Ok(RunPlan::Scheduled {
                schedule,
                steps: steps_for(m, cfg.case, k),
            })
        }
    }
}

/// One run of the configured method.
pub fn run_one(
    problem: &Problem,
    noise: &NoiseModel,
    plan: &RunPlan,
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<TrialRecord> {
    match (problem, plan) {
        (Problem::Min(p), RunPlan::Plain { gamma, steps }) => run_sgd(p, noise, *gamma, *steps, opts, rng),
        (Problem::Min(p), RunPlan::Restarted(plan)) => run_r_clipped_sstm(p, noise, plan, opts, rng),
        (Problem::Min(p), RunPlan::Scheduled { schedule, steps }) => match schedule.method {
            Method::ClippedSgd => run_clipped_sgd(p, noise, schedule, *steps, opts, rng),
            Method::ClippedSstm => run_clipped_sstm(p, noise, schedule, *steps, opts, rng),
            m => Err(config(format!("{} needs a variational inequality", m.as_str()))),
        },
        (Problem::Vip(p), RunPlan::Scheduled { schedule, steps }) => match schedule.method {
            Method::ClippedSeg => run_clipped_seg(p, noise, schedule, *steps, opts, rng),
            Method::ClippedSgda => run_clipped_sgda(p, noise, schedule, *steps, opts, rng),
            m => Err(config(format!("{} needs a minimization problem", m.as_str()))),
        },
        (Problem::Vip(_), _) => Err(config("plain SGD and restarts need a minimization problem")),
    }
}

/// Final metric and containment flag of each trial, in trial order.
pub fn trial_outcomes(
    cfg: &ExperimentConfig,
    problem: &Problem,
    plan: &RunPlan,
    k: usize,
    n: usize,
) -> Result<Vec<(f64, bool)>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_stream(cfg.seed_base, k, i);
            let rec = run_one(problem, &cfg.noise, plan, &RunOptions::ends_only(), &mut rng)?;
            Ok((rec.final_metric, rec.left_ball))
        })
        .collect()
}

fn summarize(cfg: &ExperimentConfig, plan: &RunPlan, problem: &Problem, k: usize, out: &[(f64, bool)]) -> Result<KSummary> {
    let n = out.len();
    let metrics: Vec<f64> = out.iter().map(|o| o.0).collect();
    let est = quantile_with_ci(&metrics, cfg.quantile_level())?;
    let fail_freq = cfg
        .epsilon
        .map(|e| metrics.iter().filter(|&&m| m > e).count() as f64 / n as f64);
    let leftball_freq = out.iter().filter(|o| o.1).count() as f64 / n as f64;
    let guarantee = match plan {
        RunPlan::Scheduled { schedule, .. } => schedule
            .guarantee(&schedule_params(cfg, problem, k))
            .filter(|g| g.is_finite()),
        _ => None,
    };
    Ok(KSummary {
        k,
        steps: plan.steps(),
        quantile: est.value,
        ci_lo: est.ci_lo,
        ci_hi: est.ci_hi,
        fail_freq,
        leftball_freq,
        n,
        guarantee,
    })
}

/// Runs `N` trials per horizon and summarizes the case metric. Horizons whose
/// schedule hypotheses fail are skipped and listed in the report. `threads`
/// bounds the worker pool (`None` uses rayon's default).
pub fn run_trials(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<QuantileReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| config(format!("thread pool: {e}")))?;
    let started = Instant::now();
    let problem = build_problem(cfg)?;
    let n = cfg.n_trials();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let ks: Vec<usize> = if cfg.method == Method::RClippedSstm { vec![0] } else { cfg.ks.clone() };
    for k in ks {
        let plan = match plan_for(cfg, &problem, k) {
            Ok(p) => p,
            Err(e @ (Error::Hypothesis(_) | Error::AlreadySolved(_))) => {
                skipped.push(SkippedK { k, reason: e.to_string() });
                continue;
            }
            Err(e) => return Err(e),
        };
        let key = if let RunPlan::Restarted(p) = &plan { p.total_iterations() } else { k };
        let out = pool.install(|| trial_outcomes(cfg, &problem, &plan, key, n))?;
        rows.push(summarize(cfg, &plan, &problem, key, &out)?);
    }
    Ok(QuantileReport {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        quantile_level: cfg.quantile_level(),
        rows,
        skipped,
    })
}
