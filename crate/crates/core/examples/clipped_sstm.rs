//! Accelerated clipped method on a convex quadratic and its restarted
//! variant on a strongly convex one.
//!
//!     cargo run --release --example clipped_sstm

use clipopt::optimizers::{run_clipped_sgd, run_clipped_sstm, run_r_clipped_sstm, RunOptions};
use clipopt::problems::make_quadratic_min;
use clipopt::schedules::{restart_plan, sgd_schedule, sstm_schedule, ScheduleParams};
use clipopt::{Fidelity, NoiseModel, RegimeCase, RngStream};

fn main() -> clipopt::Result<()> {
    let mut rng = RngStream::new(11);
    let p = make_quadratic_min(20, 0.0, 1.0, None, None, None, &mut rng)?;
    for k in [100usize, 1000, 10_000] {
        let sp = ScheduleParams { l: 1.0, mu: 0.0, r: p.radius, delta: p.initial_gap(), sigma: 0.0, alpha: 2.0, horizon_k: k, beta: 0.05 };
        let sstm = sstm_schedule(&sp, Fidelity::Theory)?;
        let sgd = sgd_schedule(RegimeCase::Convex, &sp, Fidelity::Theory)?;
        let a = run_clipped_sstm(&p, &NoiseModel::none(), &sstm, k, &RunOptions::default(), &mut rng)?;
        let b = run_clipped_sgd(&p, &NoiseModel::none(), &sgd, k, &RunOptions::default(), &mut rng)?;
        println!(
            "K = {k:>6}: accelerated {:.3e} (bound {:.3e}), averaged SGD {:.3e} (bound {:.3e})",
            a.final_metric, sstm.guarantee(&sp).unwrap(), b.final_metric, sgd.guarantee(&sp).unwrap()
        );
    }

    let q = make_quadratic_min(5, 0.5, 1.0, None, None, None, &mut rng)?;
    // Stage lengths grow like (sigma R / eps)^(alpha / (alpha - 1)), so keep the
    // noise small for a quick run.
    let noise = NoiseModel::heavy_tail(1e-5, 1.5, None)?;
    let eps = 1e-3;
    let plan = restart_plan(1.0, q.mu_sc, q.radius, noise.sigma, noise.alpha, eps, 0.05)?;
    let rec = run_r_clipped_sstm(&q, &noise, &plan, &RunOptions::default(), &mut rng)?;
    println!("restarts: {} stages, {} oracle calls", plan.tau, rec.oracle_calls);
    for s in &rec.stages {
        println!("  stage {}: K_t = {:>7}, f - f* = {:.3e} (target {:.3e})", s.stage, s.k_t, s.value_gap, s.eps_t);
    }
    Ok(())
}
