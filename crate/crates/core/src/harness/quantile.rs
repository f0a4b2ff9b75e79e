use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{contract, Result};

/// Empirical `q`-quantile with an exact distribution-free confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub q: f64,
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// 1-based ranks of the point estimate and interval ends.
    pub rank: usize,
    pub rank_lo: usize,
    pub rank_hi: usize,
}

/// Ranks `(lo, hi)` such that `[X_(lo), X_(hi)]` covers the true `q`-quantile
/// with probability at least `level` (before clamping to `1..=n`).
///
/// `P{X_(r) <= xi_q} = P{B >= r}` with `B ~ Bin(n, q)`, so the interval's
/// coverage is `P{lo <= B <= hi - 1}`.
pub fn binomial_ranks(n: usize, q: f64, level: f64) -> Result<(usize, usize)> {
    if n == 0 || !(q > 0.0 && q < 1.0) || !(level > 0.0 && level < 1.0) {
        return Err(contract("binomial ranks need n >= 1, q and level in (0, 1)"));
    }
    let tail = (1.0 - level) / 2.0;
    let bin = Binomial::new(q, n as u64).map_err(|e| contract(e.to_string()))?;
    // Largest lo with P{B <= lo - 1} <= tail.
    let mut lo = 1;
    for r in (1..=n).rev() {
        if bin.cdf(r as u64 - 1) <= tail {
            lo = r;
            break;
        }
    }
    // Smallest hi with P{B <= hi - 1} >= 1 - tail.
    let mut hi = n;
    for r in 1..=n {
        if bin.cdf(r as u64 - 1) >= 1.0 - tail {
            hi = r;
            break;
        }
    }
    Ok((lo, hi))
}

/// Order statistic `X_(ceil(q n))` with a 95% exact binomial interval.
pub fn quantile_with_ci(values: &[f64], q: f64) -> Result<QuantileEstimate> {
    if values.is_empty() {
        return Err(contract("quantile of an empty sample"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(contract("quantile of a sample containing NaN"));
    }
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    let (lo, hi) = binomial_ranks(n, q, 0.95)?;
    let (lo, hi) = (lo.min(rank), hi.max(rank));
    Ok(QuantileEstimate {
        q,
        value: s[rank - 1],
        ci_lo: s[lo - 1],
        ci_hi: s[hi - 1],
        rank,
        rank_lo: lo,
        rank_hi: hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn single_value() {
        let e = quantile_with_ci(&[3.5], 0.95).unwrap();
        assert_eq!((e.value, e.ci_lo, e.ci_hi), (3.5, 3.5, 3.5));
    }

    #[test]
    fn constant_sample_has_zero_width() {
        let e = quantile_with_ci(&[2.0; 50], 0.9).unwrap();
        assert_eq!(e.ci_hi - e.ci_lo, 0.0);
    }

    #[test]
    fn median_ranks_match_table() {
        // n = 100, q = 0.5: the classic exact 95% interval is X_(40)..X_(61).
        assert_eq!(binomial_ranks(100, 0.5, 0.95).unwrap(), (40, 61));
    }

    #[test]
    fn rank_is_ceiling() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(quantile_with_ci(&v, 0.95).unwrap().value, 10.0);
        assert_eq!(quantile_with_ci(&v, 0.5).unwrap().value, 5.0);
        assert_eq!(quantile_with_ci(&v, 0.51).unwrap().value, 6.0);
    }

    #[test]
    fn coverage_on_uniform_samples() {
        let q = 0.9;
        let mut rng = RngStream::new(99);
        let mut hits = 0;
        let meta = 1000;
        for _ in 0..meta {
            let v: Vec<f64> = (0..200).map(|_| rng.uniform()).collect();
            let e = quantile_with_ci(&v, q).unwrap();
            if e.ci_lo <= q && q <= e.ci_hi {
                hits += 1;
            }
        }
        assert!(hits as f64 / meta as f64 >= 0.93, "coverage {hits}/{meta}");
    }

    #[test]
    fn rejects_nan_and_empty() {
        assert!(quantile_with_ci(&[], 0.5).is_err());
        assert!(quantile_with_ci(&[1.0, f64::NAN], 0.5).is_err());
    }
}
