//! Convergence criteria: the restricted gap function and per-record series.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{config, contract, Error, Result};
use crate::optimizers::TrialRecord;
use crate::vector::DenseVector;

/// Eigenvalues of the symmetric part above this (relative) negative threshold
/// are treated as zero.
const PSD_TOL: f64 = 1e-12;

/// `Gap_R(x) = max_{y in B_R(x*)} <F(y), x - y>` for an affine monotone
/// operator `F(y) = M (y - x*)`.
///
/// With `u = y - x*` and `v = x - x*` the objective is
/// `u^T M^T v - u^T S u` with `S` the symmetric part of `M`, a concave
/// quadratic maximized over the ball `||u|| <= R`. The maximizer solves
/// `(2S + nu I) u = M^T v` for the smallest `nu >= 0` with `||u|| <= R`,
/// found by bisection in the eigenbasis of `S`. For skew `M` this reduces to
/// `R ||M (x - x*)||`.
#[derive(Debug, Clone)]
pub struct AffineGap {
    matrix: DMatrix<f64>,
    x_star: DVector<f64>,
    radius: f64,
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
    skew: bool,
}

impl AffineGap {
    pub fn new(matrix: &DMatrix<f64>, x_star: &DenseVector, radius: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(contract(format!("operator matrix must be square, got {}x{}", matrix.nrows(), matrix.ncols())));
        }
        if matrix.nrows() != x_star.dim() {
            return Err(contract("matrix and x* dimensions differ"));
        }
        if !(radius > 0.0) {
            return Err(contract(format!("gap radius must be positive, got {radius}")));
        }
        let sym = (matrix + matrix.transpose()) * 0.5;
        let scale = matrix.abs().max().max(f64::MIN_POSITIVE);
        let skew = sym.abs().max() <= PSD_TOL * scale;
        let eig = sym.symmetric_eigen();
        if eig.eigenvalues.min() < -1e-9 * scale {
            return Err(contract("affine gap needs a monotone operator (PSD symmetric part)"));
        }
        Ok(Self {
            matrix: matrix.clone(),
            x_star: DVector::from_column_slice(x_star.as_slice()),
            radius,
            eigvecs: eig.eigenvectors,
            eigvals: eig.eigenvalues.map(|l| l.max(0.0)),
            skew,
        })
    }

    pub fn eval(&self, x: &DenseVector) -> f64 {
        let v = DVector::from_column_slice(x.as_slice()) - &self.x_star;
        let b = self.matrix.transpose() * &v;
        let bn = b.norm();
        if bn == 0.0 {
            return 0.0;
        }
        if self.skew {
            return self.radius * bn;
        }
        let bt = self.eigvecs.transpose() * &b;
        let lam = &self.eigvals;
        let norm_at = |nu: f64| -> f64 {
            bt.iter()
                .zip(lam.iter())
                .map(|(bi, li)| {
                    let den = 2.0 * li + nu;
                    if den > 0.0 {
                        (bi / den).powi(2)
                    } else if *bi == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                })
                .sum::<f64>()
                .sqrt()
        };
        let value_at = |nu: f64| -> f64 {
            // bt^T ut - sum lam_i ut_i^2 with ut_i = bt_i/(2 lam_i + nu).
            bt.iter()
                .zip(lam.iter())
                .map(|(bi, li)| {
                    let den = 2.0 * li + nu;
                    if den > 0.0 {
                        let u = bi / den;
                        bi * u - li * u * u
                    } else {
                        0.0
                    }
                })
                .sum()
        };
        if norm_at(0.0) <= self.radius {
            return value_at(0.0);
        }
        let (mut lo, mut hi) = (0.0, bn / self.radius);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if norm_at(mid) > self.radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        value_at(hi)
    }
}

/// One-shot version of [`AffineGap::eval`].
pub fn gap_restricted_affine(matrix: &DMatrix<f64>, x_star: &DenseVector, x: &DenseVector, radius: f64) -> Result<f64> {
    if x.dim() != x_star.dim() {
        return Err(contract("point and x* dimensions differ"));
    }
    Ok(AffineGap::new(matrix, x_star, radius)?.eval(x))
}

/// Grid maximization of `<F(y), x - y>` over `B_R(x*)` using the points
/// `x* + h i`, `i` integer, that lie in the ball (`dim <= 3`). Halving `h`
/// refines the grid, so the result never decreases.
pub fn gap_bruteforce(
    operator: impl Fn(&[f64], &mut [f64]),
    x_star: &DenseVector,
    x: &DenseVector,
    radius: f64,
    h: f64,
) -> Result<f64> {
    let d = x_star.dim();
    if d > 3 {
        return Err(Error::UnsupportedDimension {
            dim: d,
            reason: "brute-force gap is limited to dim <= 3".into(),
        });
    }
    if x.dim() != d {
        return Err(contract("point and x* dimensions differ"));
    }
    if !(h > 0.0) || !(radius > 0.0) {
        return Err(contract("grid spacing and radius must be positive"));
    }
    let n = (radius / h).floor() as i64;
    let mut idx = vec![-n; d];
    let mut y = vec![0.0; d];
    let mut f = vec![0.0; d];
    let mut best = f64::NEG_INFINITY;
    let r2 = radius * radius * (1.0 + 1e-12);
    'outer: loop {
        let off2: f64 = idx.iter().map(|&i| (i as f64 * h).powi(2)).sum();
        if off2 <= r2 {
            for j in 0..d {
                y[j] = x_star[j] + idx[j] as f64 * h;
            }
            operator(&y, &mut f);
            let val: f64 = (0..d).map(|j| f[j] * (x[j] - y[j])).sum();
            best = best.max(val);
        }
        for j in 0..d {
            if idx[j] < n {
                idx[j] += 1;
                continue 'outer;
            }
            idx[j] = -n;
        }
        break;
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// The metric the run's regime is measured by.
    CaseMetric,
    DistanceSq,
    ValueGap,
    GradNormSq,
    GradNormMean,
}

/// Extracts `(k, value)` pairs of `kind` from a record's checkpoints.
pub fn metric_series(record: &TrialRecord, kind: MetricKind) -> Result<Vec<(usize, f64)>> {
    record
        .checkpoints
        .iter()
        .map(|c| {
            let v = match kind {
                MetricKind::CaseMetric => Some(c.metric),
                MetricKind::DistanceSq => c.dist_sq,
                MetricKind::ValueGap => c.value_gap,
                MetricKind::GradNormSq => c.grad_sq,
                MetricKind::GradNormMean => c.grad_sq_mean,
            };
            v.map(|v| (c.k, v))
                .ok_or_else(|| config(format!("record has no {kind:?} values (missing x* or not a minimization run)")))
        })
        .collect()
}
