//! Clipped extragradient on a bilinear saddle point and clipped SGDA on a
//! cocoercive operator, both under heavy-tailed noise.
//!
//!     cargo run --release --example variational

use clipopt::optimizers::{run_clipped_seg, run_clipped_sgda, run_extragradient, RunOptions};
use clipopt::problems::{make_cocoercive_affine_vip, make_skew_bilinear};
use clipopt::schedules::{seg_schedule, sgda_schedule, ScheduleParams};
use clipopt::{Fidelity, NoiseModel, RegimeCase, RngStream};

fn main() -> clipopt::Result<()> {
    let mut rng = RngStream::new(13);
    let noise = NoiseModel::heavy_tail(0.5, 1.5, None)?;
    let game = make_skew_bilinear(4, 1.0, None, None, &mut rng)?;
    let k = 5000;
    let p = ScheduleParams { l: 1.0, mu: 0.0, r: game.radius, delta: 0.0, sigma: 0.5, alpha: 1.5, horizon_k: k, beta: 0.05 };
    let s = seg_schedule(RegimeCase::Monotone, &p, Fidelity::Practical { gamma_factor: 20.0 })?;
    let clipped = run_clipped_seg(&game, &noise, &s, k + 1, &RunOptions::default(), &mut rng.child(0))?;
    let plain = run_extragradient(&game, &noise, s.gamma, k + 1, &RunOptions::default(), &mut rng.child(0))?;
    println!("extragradient, bilinear: clipped gap {:.3e}, unclipped final distance^2 {:.3e}", clipped.final_metric, plain.final_metric);
    println!("  clipped max distance {:.3} (ball 3R = {:.3})", clipped.max_dist_from_star, 3.0 * game.radius);

    let op = make_cocoercive_affine_vip(4, 2.0, Some(0.2), None, None, &mut rng)?;
    for case in [RegimeCase::MonotoneStarCoco, RegimeCase::StarCoco, RegimeCase::Qsm] {
        let p = ScheduleParams { l: op.ell_coco, mu: op.mu_qsm, r: op.radius, delta: 0.0, sigma: 0.5, alpha: 1.5, horizon_k: k, beta: 0.05 };
        let s = sgda_schedule(case, &p, Fidelity::Theory)?;
        let steps = clipopt::harness::steps_for(clipopt::Method::ClippedSgda, case, k);
        let rec = run_clipped_sgda(&op, &noise, &s, steps, &RunOptions::default(), &mut rng)?;
        println!("SGDA {:<19} {} = {:.3e} (noiseless bound {:.3e})", case.as_str(), rec.metric_name, rec.final_metric, s.guarantee(&p).unwrap());
    }
    Ok(())
}
