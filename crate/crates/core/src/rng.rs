//! Seeded, splittable random streams.
//!
//! Every stochastic quantity in the crate is drawn from an [`RngStream`]. A
//! stream is a ChaCha8 generator keyed by a 64-bit seed; child streams are
//! derived from the parent seed and a label through a SplitMix64 finalizer,
//! so the tree of streams used by an experiment depends only on the root seed
//! and never on scheduling order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{contract, Result};
use crate::vector::DenseVector;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent stream from this stream's seed and `label`.
    /// Does not advance `self`.
    pub fn child(&self, label: u64) -> Self {
        Self::new(splitmix64(self.seed ^ splitmix64(label)))
    }

    /// Derives a stream keyed by a path of labels, e.g. `(trial, horizon)`.
    pub fn child_path(&self, labels: &[u64]) -> Self {
        labels.iter().fold(self.clone(), |s, &l| s.child(l))
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Fills `out` with a direction drawn uniformly from the unit sphere.
    pub fn fill_unit_direction(&mut self, out: &mut [f64]) {
        loop {
            let mut sq = 0.0;
            for c in out.iter_mut() {
                *c = self.standard_normal();
                sq += *c * *c;
            }
            if sq > 1e-300 {
                let inv = 1.0 / sq.sqrt();
                out.iter_mut().for_each(|c| *c *= inv);
                return;
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Draws a point uniformly from the closed ball of `radius` around `center`.
pub fn sample_in_ball(center: &DenseVector, radius: f64, rng: &mut RngStream) -> Result<DenseVector> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(contract(format!("ball radius must be finite and nonnegative, got {radius}")));
    }
    if radius == 0.0 {
        return Ok(center.clone());
    }
    let d = center.dim();
    let mut dir = vec![0.0; d];
    rng.fill_unit_direction(&mut dir);
    let r = radius * rng.uniform().powf(1.0 / d as f64);
    let coords = center.iter().zip(&dir).map(|(c, u)| c + r * u).collect();
    DenseVector::new(coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for _ in 0..10_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn children_are_deterministic_and_distinct() {
        let root = RngStream::new(7);
        let mut c1 = root.child(3);
        let mut c1b = RngStream::new(7).child(3);
        let mut c2 = root.child(4);
        let x = c1.next_u64();
        assert_eq!(x, c1b.next_u64());
        assert_ne!(x, c2.next_u64());
        assert_eq!(root.child_path(&[1, 2]).seed(), root.child(1).child(2).seed());
        assert_ne!(root.child_path(&[1, 2]).seed(), root.child_path(&[2, 1]).seed());
    }

    #[test]
    fn ball_radius_zero_returns_center() {
        let c = DenseVector::from_slice(&[1.0, -2.0, 0.5]).unwrap();
        let mut rng = RngStream::new(1);
        assert_eq!(sample_in_ball(&c, 0.0, &mut rng).unwrap(), c);
    }

    #[test]
    fn ball_samples_stay_inside() {
        let c = DenseVector::from_slice(&[0.3, -0.2]).unwrap();
        let mut rng = RngStream::new(2);
        for _ in 0..100_000 {
            let p = sample_in_ball(&c, 1.0, &mut rng).unwrap();
            assert!(p.distance(&c).unwrap() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn ball_samples_centered() {
        // Monte-Carlo symmetry: each coordinate of a uniform point in the unit
        // disk has variance 1/4, so the mean of 1e5 draws has sd ~ 0.0016.
        let c = DenseVector::from_slice(&[2.0, -1.0]).unwrap();
        let mut rng = RngStream::new(3);
        let n = 100_000;
        let mut mean = [0.0; 2];
        for _ in 0..n {
            let p = sample_in_ball(&c, 1.0, &mut rng).unwrap();
            mean[0] += p[0] / n as f64;
            mean[1] += p[1] / n as f64;
        }
        assert!((mean[0] - 2.0).abs() < 0.02);
        assert!((mean[1] + 1.0).abs() < 0.02);
    }

    #[test]
    fn negative_radius_rejected() {
        let c = DenseVector::zeros(2);
        assert!(sample_in_ball(&c, -1.0, &mut RngStream::new(0)).is_err());
    }
}
