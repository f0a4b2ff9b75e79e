//! High-quantile convergence of clipped SGD over a horizon sweep, with a
//! log-log slope fit and CSV output.
//!
//!     cargo run --release --example rate_sweep [out.csv]

use clipopt::harness::{emit_report, run_rates, ExperimentConfig, Format};

const CONFIG: &str = r#"{
    "schema_version": 1,
    "problem": {"family": "quadratic_min", "dim": 10, "mu": 0.0, "l": 1.0},
    "noise": {"kind": {"heavy_tail_radial": {"tail_index": 1.75}}, "sigma": 1.0, "alpha": 1.5},
    "method": "clipped_sgd",
    "case": "convex",
    "fidelity": {"mode": "practical", "gamma_factor": 20.0},
    "ks": [256, 512, 1024, 2048, 4096],
    "trials": 100,
    "beta": 0.05,
    "seed_base": 1
}"#;

fn main() -> clipopt::Result<()> {
    let cfg = ExperimentConfig::from_json(CONFIG)?;
    let rates = run_rates(&cfg, None)?;
    println!("{:>6} {:>11} {:>11} {:>11} {:>8}", "K", "q95", "ci_lo", "ci_hi", "left");
    for r in &rates.report.rows {
        println!("{:>6} {:>11.3e} {:>11.3e} {:>11.3e} {:>8}", r.k, r.quantile, r.ci_lo, r.ci_hi, r.leftball_freq);
    }
    if let Some(f) = rates.fit {
        println!("slope {:.3} +- {:.3}, stochastic-term exponent {:.3}", f.slope, f.stderr, rates.reference_slope);
    }
    if let Some(path) = std::env::args().nth(1) {
        emit_report(&rates.report, Format::Csv, path.as_ref())?;
    }
    Ok(())
}
