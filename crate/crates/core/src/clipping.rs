//! Norm clipping and Monte-Carlo checks of the clipped-estimator moment bounds.

use serde::{Deserialize, Serialize};

use crate::error::{contract, hypothesis, Result};
use crate::noise::NoiseModel;
use crate::rng::RngStream;
use crate::vector::DenseVector;

/// `clip(x, lambda) = min{1, lambda/||x||} x`, with `clip(0, lambda) = 0`.
pub fn clip(x: &DenseVector, lambda: f64) -> Result<DenseVector> {
    check_level(lambda)?;
    let mut out = x.clone();
    clip_in_place(out.as_mut_slice(), lambda);
    Ok(out)
}

fn check_level(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(contract(format!("clipping level must be positive and finite, got {lambda}")));
    }
    Ok(())
}

/// Clips `x` in place and returns the original norm. Leaves `x` untouched
/// (bit for bit) when `||x|| <= lambda`. The caller guarantees `lambda > 0`.
#[inline]
pub fn clip_in_place(x: &mut [f64], lambda: f64) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > lambda {
        let s = lambda / norm;
        x.iter_mut().for_each(|v| *v *= s);
    }
    norm
}

/// A bounded nonlinearity applied to stochastic gradients.
///
/// The convergence analysis only uses `||psi(x)|| <= lambda` together with the
/// bias and variance bounds of [`lemma_bounds`]; any map with those
/// properties can stand in for norm clipping. Only [`NormClip`] ships.
pub trait Nonlinearity: Send + Sync {
    fn apply(&self, x: &mut [f64], lambda: f64);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NormClip;

impl Nonlinearity for NormClip {
    fn apply(&self, x: &mut [f64], lambda: f64) {
        clip_in_place(x, lambda);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipMomentBounds {
    pub bias_bound: f64,
    pub second_moment_bound: f64,
    pub dev_bound: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
}

/// Closed-form bias, second-moment and deviation bounds for the clipped
/// estimator `clip(x + xi, lambda)` when `E||xi||^alpha <= sigma^alpha`.
pub fn lemma_bounds(sigma: f64, alpha: f64, lambda: f64) -> Result<ClipMomentBounds> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(contract(format!("moment order must lie in (1, 2], got {alpha}")));
    }
    if !(sigma >= 0.0) {
        return Err(contract(format!("sigma must be nonnegative, got {sigma}")));
    }
    check_level(lambda)?;
    let sa = sigma.powf(alpha);
    Ok(ClipMomentBounds {
        bias_bound: 2f64.powf(alpha) * sa / lambda.powf(alpha - 1.0),
        second_moment_bound: 18.0 * lambda.powf(2.0 - alpha) * sa,
        dev_bound: 2.0 * lambda,
        lambda,
        sigma,
        alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipMomentEstimate {
    /// `||mean(X~) - x||`.
    pub empirical_bias: f64,
    /// Mean of `||X~ - x||^2`.
    pub empirical_second_moment: f64,
    /// `max ||X~ - mean(X~)||` over all samples.
    pub empirical_max_dev: f64,
    pub n_samples: usize,
    pub bias_se: f64,
    pub second_moment_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub estimate: ClipMomentEstimate,
    pub bounds: ClipMomentBounds,
    pub pass: bool,
}

const CHUNK: usize = 1 << 16;

/// Draws `X = mean_point + xi`, clips it at `lambda` and compares the
/// empirical moments with [`lemma_bounds`]. Bias and second moment pass
/// within three standard errors; the deviation bound must hold on every
/// sample.
///
/// Samples are generated in fixed-size chunks, each from its own child of
/// `rng`, so the result does not depend on how chunks are scheduled.
pub fn verify_lemma(
    noise: &NoiseModel,
    mean_point: &DenseVector,
    lambda: f64,
    n_samples: usize,
    rng: &RngStream,
) -> Result<LemmaCheck> {
    check_level(lambda)?;
    if n_samples < 2 {
        return Err(contract("need at least two samples"));
    }
    if mean_point.norm() > lambda / 2.0 {
        return Err(hypothesis(format!(
            "mean point norm {} exceeds lambda/2 = {}",
            mean_point.norm(),
            lambda / 2.0
        )));
    }
    let bounds = lemma_bounds(noise.sigma, noise.alpha, lambda)?;
    let d = mean_point.dim();
    let n_chunks = n_samples.div_ceil(CHUNK);
    let chunk_len = |c: usize| CHUNK.min(n_samples - c * CHUNK);

    // Generates chunk `c` and feeds each clipped deviation `X~ - x` to `f`.
    let for_chunk = |c: usize, f: &mut dyn FnMut(&[f64])| -> Result<()> {
        let mut r = rng.child(c as u64);
        let mut buf = vec![0.0; d];
        for _ in 0..chunk_len(c) {
            noise.sample_into(0, &mut buf, &mut r)?;
            for (b, m) in buf.iter_mut().zip(mean_point.iter()) {
                *b += m;
            }
            clip_in_place(&mut buf, lambda);
            for (b, m) in buf.iter_mut().zip(mean_point.iter()) {
                *b -= m;
            }
            f(&buf);
        }
        Ok(())
    };

    // First pass: per-coordinate mean/variance of the deviation and moments
    // of its squared norm (Welford).
    let mut count = 0usize;
    let mut mean = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    let mut sq_mean = 0.0;
    let mut sq_m2 = 0.0;
    for c in 0..n_chunks {
        for_chunk(c, &mut |v: &[f64]| {
            count += 1;
            let w = 1.0 / count as f64;
            for i in 0..d {
                let delta = v[i] - mean[i];
                mean[i] += delta * w;
                m2[i] += delta * (v[i] - mean[i]);
            }
            let s: f64 = v.iter().map(|t| t * t).sum();
            let delta = s - sq_mean;
            sq_mean += delta * w;
            sq_m2 += delta * (s - sq_mean);
        })?;
    }
    let n = count as f64;
    let bias = mean.iter().map(|t| t * t).sum::<f64>().sqrt();
    let bias_se = (m2.iter().sum::<f64>() / (n - 1.0) / n).sqrt();
    let second_moment_se = (sq_m2 / (n - 1.0) / n).sqrt();

    // Second pass: exact maximum distance from the empirical mean of X~.
    let mut max_dev = 0.0f64;
    for c in 0..n_chunks {
        for_chunk(c, &mut |v: &[f64]| {
            let dist: f64 = v.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum();
            max_dev = max_dev.max(dist.sqrt());
        })?;
    }

    let estimate = ClipMomentEstimate {
        empirical_bias: bias,
        empirical_second_moment: sq_mean,
        empirical_max_dev: max_dev,
        n_samples: count,
        bias_se,
        second_moment_se,
    };
    let pass = bias <= bounds.bias_bound + 3.0 * bias_se
        && sq_mean <= bounds.second_moment_bound + 3.0 * second_moment_se
        && max_dev <= bounds.dev_bound;
    Ok(LemmaCheck { estimate, bounds, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseKind;
    use proptest::prelude::*;

    fn v(c: &[f64]) -> DenseVector {
        DenseVector::from_slice(c).unwrap()
    }

    #[test]
    fn clip_examples() {
        let c = clip(&v(&[3.0, 4.0]), 2.0).unwrap();
        assert!((c[0] - 1.2).abs() < 1e-15 && (c[1] - 1.6).abs() < 1e-15);
        assert_eq!(clip(&v(&[1.0, 0.0]), 5.0).unwrap(), v(&[1.0, 0.0]));
        assert_eq!(clip(&DenseVector::zeros(3), 0.5).unwrap(), DenseVector::zeros(3));
    }

    #[test]
    fn clip_rejects_nonpositive_level() {
        assert!(matches!(clip(&v(&[1.0]), 0.0), Err(crate::Error::Contract(_))));
        assert!(matches!(clip(&v(&[1.0]), -1.0), Err(crate::Error::Contract(_))));
    }

    #[test]
    fn bounds_examples() {
        let b = lemma_bounds(1.0, 2.0, 4.0).unwrap();
        assert!((b.bias_bound - 1.0).abs() < 1e-15);
        assert!((b.second_moment_bound - 18.0).abs() < 1e-12);
        assert_eq!(b.dev_bound, 8.0);
        let z = lemma_bounds(0.0, 1.3, 2.0).unwrap();
        assert_eq!((z.bias_bound, z.second_moment_bound), (0.0, 0.0));
        let h = lemma_bounds(1.0, 1.5, 9.0).unwrap();
        assert!((h.bias_bound - 2f64.powf(1.5) / 3.0).abs() < 1e-12);
        assert!((h.bias_bound - 0.9428).abs() < 1e-4);
    }

    #[test]
    fn bounds_reject_bad_alpha() {
        assert!(lemma_bounds(1.0, 1.0, 1.0).is_err());
        assert!(lemma_bounds(1.0, 2.5, 1.0).is_err());
    }

    #[test]
    fn verify_zero_noise() {
        let noise = NoiseModel::none();
        let x = v(&[0.3, 0.4]);
        let chk = verify_lemma(&noise, &x, 2.0, 1000, &RngStream::new(1)).unwrap();
        assert_eq!(chk.estimate.empirical_bias, 0.0);
        assert!(chk.pass);
    }

    #[test]
    fn verify_rejects_far_mean_point() {
        let noise = NoiseModel::none();
        let err = verify_lemma(&noise, &v(&[2.0]), 2.0, 100, &RngStream::new(1)).unwrap_err();
        assert!(matches!(err, crate::Error::Hypothesis(_)));
    }

    #[test]
    fn verify_heavy_tail_passes() {
        let noise = NoiseModel::heavy_tail(1.0, 1.5, None).unwrap();
        let x = v(&[1.0, 0.0, 0.0]);
        let chk = verify_lemma(&noise, &x, 10.0, 1_000_000, &RngStream::new(11)).unwrap();
        assert!(chk.pass, "{chk:?}");
        assert!(chk.estimate.empirical_max_dev <= 20.0);
        assert!(matches!(noise.kind, NoiseKind::HeavyTailRadial { .. }));
    }

    proptest! {
        #[test]
        fn clip_norm_is_min(xs in prop::collection::vec(-100f64..100.0, 1..16), lambda in 1e-3f64..50.0) {
            let x = DenseVector::new(xs).unwrap();
            let c = clip(&x, lambda).unwrap();
            let want = x.norm().min(lambda);
            prop_assert!(c.norm() <= lambda * (1.0 + 1e-12));
            prop_assert!((c.norm() - want).abs() <= 1e-12 * want.max(1e-300));
        }

        #[test]
        fn clip_preserves_direction(xs in prop::collection::vec(-10f64..10.0, 1..16), c in 0.01f64..100.0, lambda in 0.01f64..10.0) {
            let x = DenseVector::new(xs).unwrap();
            prop_assume!(x.norm() > 1e-6);
            let r = clip(&x.scale(c), lambda).unwrap();
            let cos = r.dot(&x).unwrap() / (r.norm() * x.norm());
            prop_assert!((cos - 1.0).abs() < 1e-12);
        }

        #[test]
        fn clip_monotone_in_level(xs in prop::collection::vec(-10f64..10.0, 1..16), l1 in 0.01f64..10.0, l2 in 0.01f64..10.0) {
            let x = DenseVector::new(xs).unwrap();
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            prop_assert!(clip(&x, lo).unwrap().norm() <= clip(&x, hi).unwrap().norm() * (1.0 + 1e-15));
        }
    }
}
