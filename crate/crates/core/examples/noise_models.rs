//! Noise models and their moment certificates. Heavy-tailed noise has a
//! bounded `alpha`-th moment while its sample variance keeps growing.
//!
//!     cargo run --release --example noise_models

use clipopt::noise::default_tail_index;
use clipopt::{certify_moment, AdversarialParams, NoiseModel, RngStream};

fn main() -> clipopt::Result<()> {
    let mut rng = RngStream::new(3);
    let models = [
        ("gaussian", NoiseModel::gaussian(1.0)?),
        ("heavy alpha=1.5", NoiseModel::heavy_tail(1.0, 1.5, None)?),
        ("heavy alpha=1.2", NoiseModel::heavy_tail(1.0, 1.2, None)?),
    ];
    for (name, m) in &models {
        let c = certify_moment(m, 4, 200_000, &mut rng)?;
        println!("{name:<16} E|xi|^alpha = {:.4} (sigma^alpha = 1, rel se {:.4}) pass = {}", c.empirical_moment, c.relative_se, c.pass);
    }
    println!("default tail index for alpha = 1.5: {}", default_tail_index(1.5));

    let heavy = NoiseModel::heavy_tail(1.0, 1.5, None)?;
    for n in [1_000usize, 10_000, 100_000, 1_000_000] {
        let mean_sq: f64 = (0..n).map(|_| heavy.sample(0, 2, &mut rng).map(|x| x.norm_sq())).sum::<clipopt::Result<f64>>()? / n as f64;
        println!("n = {n:>8}: sample E|xi|^2 = {mean_sq:.3}");
    }

    let p = AdversarialParams { gamma_step: 0.1, epsilon_target: 0.01, horizon_k: 10, mu_problem: 1.0, x0_abs: 0.09 };
    let adv = NoiseModel::three_point(1.0, p)?;
    let fired = (0..10_000).filter(|_| adv.sample(9, 1, &mut rng).unwrap()[0] != 0.0).count();
    println!("three-point: amplitude {} fires {:.4} of the time (1/A^2 = {})", p.amplitude(1.0), fired as f64 / 1e4, p.firing_probability(1.0));
    Ok(())
}
