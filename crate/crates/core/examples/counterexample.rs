//! Plain SGD fails with probability 1/A^2 against a three-point noise that
//! fires once at the end; clipped SGD run to its own horizon does not.
//!
//!     cargo run --release --example counterexample

use clipopt::harness::{counterexample_experiment, CounterexampleConfig};

fn main() -> clipopt::Result<()> {
    for gamma in [0.1, 0.05, 0.02] {
        let cfg = CounterexampleConfig { gamma, trials: 20_000, ..Default::default() };
        let r = counterexample_experiment(&cfg)?;
        print!(
            "gamma = {gamma}: A = {:.1}, SGD failure {:.4} (exact {:.4})",
            r.amplitude, r.empirical_failure_freq, r.analytic_failure_prob
        );
        match r.clipped {
            Some(c) => println!(", clipped SGD at K = {} fails {:.4}", c.k, c.failure_freq),
            None => println!(),
        }
    }
    Ok(())
}
