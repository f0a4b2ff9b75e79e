//! Clipped SGD in its four regimes under heavy-tailed noise, next to plain
//! SGD with the same step size.
//!
//!     cargo run --release --example clipped_sgd

use clipopt::optimizers::{run_clipped_sgd, run_sgd, RunOptions};
use clipopt::problems::{make_pl_sine, make_quadratic_min};
use clipopt::schedules::{sgd_schedule, ScheduleParams, DEFAULT_PRACTICAL_FACTOR};
use clipopt::{Fidelity, MinProblem, NoiseModel, RegimeCase, RngStream};

fn params(p: &MinProblem, mu: f64, k: usize) -> ScheduleParams {
    ScheduleParams { l: p.lipschitz_l, mu, r: p.radius, delta: p.initial_gap(), sigma: 1.0, alpha: 1.5, horizon_k: k, beta: 0.05 }
}

fn main() -> clipopt::Result<()> {
    let mut rng = RngStream::new(7);
    let noise = NoiseModel::heavy_tail(1.0, 1.5, None)?;
    let convex = make_quadratic_min(10, 0.0, 1.0, None, None, None, &mut rng)?;
    let strong = make_quadratic_min(10, 0.2, 1.0, None, None, None, &mut rng)?;
    let sine = make_pl_sine(2, None, None, &mut rng)?;
    let k = 20_000;
    let fidelity = Fidelity::Practical { gamma_factor: DEFAULT_PRACTICAL_FACTOR };
    let runs = [
        (RegimeCase::Nonconvex, &sine, 0.0),
        (RegimeCase::Pl, &sine, sine.mu_pl),
        (RegimeCase::Convex, &convex, 0.0),
        (RegimeCase::Qsc, &strong, strong.mu_sc),
    ];
    for (case, problem, mu) in runs {
        let s = sgd_schedule(case, &params(problem, mu, k), fidelity)?;
        let clipped = run_clipped_sgd(problem, &noise, &s, k, &RunOptions::default(), &mut rng.child(1))?;
        let plain = run_sgd(problem, &noise, s.gamma, k, &RunOptions::default(), &mut rng.child(1))?;
        let gap = |r: &clipopt::optimizers::TrialRecord| r.checkpoints.last().and_then(|c| c.value_gap).unwrap_or(f64::NAN);
        println!(
            "{:<10} gamma = {:.2e}  {} = {:.3e}  f(x^K) - f*: clipped {:.3e}, plain {:.3e}",
            case.as_str(), s.gamma, clipped.metric_name, clipped.final_metric, gap(&clipped), gap(&plain)
        );
    }
    Ok(())
}
