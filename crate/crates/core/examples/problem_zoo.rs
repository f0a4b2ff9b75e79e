//! Builds every shipped problem family and checks its advertised constants
//! by sampling.
//!
//!     cargo run --release --example problem_zoo

use clipopt::problems::{Problem, ProblemConfig};
use clipopt::RngStream;

fn main() -> clipopt::Result<()> {
    let configs = [
        r#"{"family": "quadratic_min", "dim": 5, "mu": 0.1, "l": 2.0}"#,
        r#"{"family": "pl_sine", "dim": 3}"#,
        r#"{"family": "counterexample1d", "mu": 1.0, "x0": 0.09}"#,
        r#"{"family": "skew_bilinear", "dim": 4, "l": 1.0}"#,
        r#"{"family": "strong_affine_vip", "dim": 4, "mu": 0.2, "l": 1.0}"#,
        r#"{"family": "cocoercive_affine_vip", "dim": 3, "ell": 2.0}"#,
    ];
    let mut rng = RngStream::new(5);
    for text in configs {
        let cfg: ProblemConfig = serde_json::from_str(text)?;
        let problem = cfg.build(&mut rng)?;
        let checks = match &problem {
            Problem::Min(p) => {
                println!("{text}\n  L = {}, mu_pl = {}, R = {:.3}, f(x0) - f* = {:.3}", p.lipschitz_l, p.mu_pl, p.radius, p.initial_gap());
                p.verify_assumptions(2000, &mut rng)?
            }
            Problem::Vip(p) => {
                println!("{text}\n  L = {:.3}, mu = {}, ell = {}, R = {:.3}", p.lipschitz_l, p.mu_qsm, p.ell_coco, p.radius);
                p.verify_assumptions(2000, &mut rng)?
            }
        };
        for c in checks {
            println!("  {:?}: holds = {} (worst excess {:.2e})", c.assumption, c.holds, c.worst_excess);
        }
    }
    Ok(())
}
