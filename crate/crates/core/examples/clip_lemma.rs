//! Empirical moments of a clipped heavy-tailed estimator against the
//! bias, second-moment and deviation envelopes.
//!
//!     cargo run --release --example clip_lemma

use clipopt::{lemma_bounds, verify_lemma, DenseVector, NoiseModel, RngStream};

fn main() -> clipopt::Result<()> {
    let root = RngStream::new(1);
    println!("{:>5} {:>5} {:>6} {:>11} {:>11} {:>11} {:>11} {:>8} {:>6}", "alpha", "sigma", "lambda", "bias", "bias bnd", "2nd mom", "2nd bnd", "max dev", "pass");
    for (i, &alpha) in [1.2, 1.5, 2.0].iter().enumerate() {
        for (j, &lambda) in [2.0, 8.0, 32.0].iter().enumerate() {
            let sigma = 1.0;
            let noise = NoiseModel::heavy_tail(sigma, alpha, None)?;
            let mean = DenseVector::basis(3, 0, lambda / 4.0);
            let check = verify_lemma(&noise, &mean, lambda, 200_000, &root.child_path(&[i as u64, j as u64]))?;
            let b = lemma_bounds(sigma, alpha, lambda)?;
            let e = &check.estimate;
            println!(
                "{alpha:>5} {sigma:>5} {lambda:>6} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>8.3} {:>6}",
                e.empirical_bias, b.bias_bound, e.empirical_second_moment, b.second_moment_bound, e.empirical_max_dev, check.pass
            );
        }
    }
    // The hypothesis ||x|| <= lambda / 2 is enforced.
    let noise = NoiseModel::heavy_tail(1.0, 1.5, None)?;
    let far = DenseVector::basis(3, 0, 3.0);
    println!("mean point outside lambda/2: {}", verify_lemma(&noise, &far, 4.0, 1000, &root).unwrap_err());
    Ok(())
}
