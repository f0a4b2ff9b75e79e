//! The restricted gap function: closed form for affine monotone operators
//! against grid maximization.
//!
//!     cargo run --release --example gap_function

use clipopt::metrics::{gap_bruteforce, AffineGap};
use clipopt::problems::{make_cocoercive_affine_vip, make_skew_bilinear};
use clipopt::{sample_in_ball, RngStream};

fn main() -> clipopt::Result<()> {
    let mut rng = RngStream::new(17);
    for (name, p) in [
        ("skew", make_skew_bilinear(2, 1.5, None, None, &mut rng)?),
        ("symmetric", make_cocoercive_affine_vip(2, 1.0, None, None, None, &mut rng)?),
    ] {
        let gap = AffineGap::new(&p.matrix, &p.x_star, p.radius)?;
        println!("{name}: Gap(x*) = {:.1e}", gap.eval(&p.x_star));
        for _ in 0..3 {
            let x = sample_in_ball(&p.x_star, p.radius, &mut rng)?;
            let op = |y: &[f64], out: &mut [f64]| {
                let v = clipopt::DenseVector::from_slice(y).unwrap();
                out.copy_from_slice(p.operator(&v).as_slice());
            };
            let grid = gap_bruteforce(op, &p.x_star, &x, p.radius, 1e-2)?;
            println!("  closed form {:.6}  grid {:.6}", gap.eval(&x), grid);
        }
    }
    Ok(())
}
