//! Step sizes and clipping levels for every method and regime, plus a
//! restart plan.
//!
//!     cargo run --release --example schedules

use clipopt::schedules::{build_schedule, restart_plan, ScheduleParams};
use clipopt::{Fidelity, Method, RegimeCase};

fn main() -> clipopt::Result<()> {
    let pairs = [
        (Method::ClippedSgd, RegimeCase::Nonconvex),
        (Method::ClippedSgd, RegimeCase::Pl),
        (Method::ClippedSgd, RegimeCase::Convex),
        (Method::ClippedSgd, RegimeCase::Qsc),
        (Method::ClippedSstm, RegimeCase::Convex),
        (Method::ClippedSeg, RegimeCase::Monotone),
        (Method::ClippedSeg, RegimeCase::Qsm),
        (Method::ClippedSgda, RegimeCase::MonotoneStarCoco),
        (Method::ClippedSgda, RegimeCase::StarCoco),
        (Method::ClippedSgda, RegimeCase::Qsm),
    ];
    for k in [1_000usize, 100_000] {
        let p = ScheduleParams { l: 1.0, mu: 0.1, r: 1.0, delta: 0.5, sigma: 1.0, alpha: 1.5, horizon_k: k, beta: 0.05 };
        println!("K = {k}");
        for (m, c) in pairs {
            let s = build_schedule(m, c, &p, Fidelity::Theory)?;
            println!(
                "  {:<13} {:<19} gamma = {:.3e} lambda_0 = {:.3e} lambda_K = {:.3e} bound = {:.3e}",
                m.as_str(), c.as_str(), s.gamma, s.lambda(0), s.lambda(k), s.guarantee(&p).unwrap_or(f64::NAN)
            );
        }
    }
    let plan = restart_plan(1.0, 0.5, 1.0, 0.0, 2.0, 1e-4, 0.05)?;
    println!("restarts: tau = {}, total iterations = {}", plan.tau, plan.total_iterations());
    for (t, s) in plan.stages.iter().enumerate() {
        println!("  stage {}: K_t = {}, a_t = {:.3e}, eps_t = {:.3e}", t + 1, s.k_t, s.a_t, s.eps_t);
    }
    Ok(())
}
