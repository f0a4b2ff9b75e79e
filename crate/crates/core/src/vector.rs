//! Dense real vectors used as iterates, gradients and operator values.

use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

use crate::error::{contract, Result};

/// A point or direction in `R^d`.
///
/// The coordinate count is fixed at construction. Binary operations check
/// arity and return [`crate::Error::Contract`] on mismatch; the `*_assign`
/// variants used in hot loops panic instead, since a mismatch there is a bug
/// in the caller's buffer setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(contract("vector dimension must be positive"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(contract("vector coordinates must be finite"));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "vector dimension must be positive");
        Self(vec![0.0; dim])
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(coords.to_vec())
    }

    /// The `i`-th standard basis vector scaled by `scale`.
    pub fn basis(dim: usize, i: usize, scale: f64) -> Self {
        let mut v = Self::zeros(dim);
        v.0[i] = scale;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(contract(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        Ok(dot_slices(&self.0, &other.0))
    }

    pub fn norm_sq(&self) -> f64 {
        dot_slices(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(self.0.iter().map(|a| c * a).collect())
    }

    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        Ok(dist_sq_slices(&self.0, &other.0).sqrt())
    }

    pub fn distance_sq(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        Ok(dist_sq_slices(&self.0, &other.0))
    }

    /// `self += c * other`.
    pub fn axpy_assign(&mut self, c: f64, other: &Self) {
        assert_eq!(self.dim(), other.dim(), "axpy dimension mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    pub fn scale_assign(&mut self, c: f64) {
        for a in &mut self.0 {
            *a *= c;
        }
    }

    pub fn copy_from(&mut self, other: &Self) {
        self.0.copy_from_slice(&other.0);
    }

    pub fn fill(&mut self, value: f64) {
        self.0.iter_mut().for_each(|a| *a = value);
    }

    /// Overwrites `self` with `(wa * a + wb * b) / denom`.
    pub fn set_combination(&mut self, wa: f64, a: &Self, wb: f64, b: &Self, denom: f64) {
        for ((s, x), y) in self.0.iter_mut().zip(&a.0).zip(&b.0) {
            *s = (wa * x + wb * y) / denom;
        }
    }

    /// Incremental running mean: after the call `self` is the mean of
    /// `count` points, the last of which is `point`.
    pub fn running_mean_update(&mut self, point: &Self, count: usize) {
        let w = 1.0 / count as f64;
        for (m, p) in self.0.iter_mut().zip(&point.0) {
            *m += w * (p - *m);
        }
    }
}

impl Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for DenseVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl AsRef<[f64]> for DenseVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist_sq_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(c: &[f64]) -> DenseVector {
        DenseVector::from_slice(c).unwrap()
    }

    #[test]
    fn dot_examples() {
        assert_eq!(v(&[1.0, 2.0]).dot(&v(&[3.0, 4.0])).unwrap(), 11.0);
        assert_eq!(v(&[1.5, -2.0]).dot(&DenseVector::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn dot_rejects_mismatched_dims() {
        let err = v(&[1.0, 2.0]).dot(&v(&[1.0])).unwrap_err();
        assert!(matches!(err, crate::Error::Contract(_)));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(v(&[3.0, 4.0]).norm(), 5.0);
        assert_eq!(DenseVector::zeros(4).norm(), 0.0);
        assert_eq!(v(&[-1.0, 0.0, 0.0]).norm(), 1.0);
    }

    #[test]
    fn rejects_nonfinite_and_empty() {
        assert!(DenseVector::new(vec![]).is_err());
        assert!(DenseVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(DenseVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn running_mean_matches_batch_mean() {
        let pts = [v(&[1.0, 0.0]), v(&[3.0, 2.0]), v(&[5.0, -2.0])];
        let mut m = pts[0].clone();
        for (i, p) in pts.iter().enumerate().skip(1) {
            m.running_mean_update(p, i + 1);
        }
        assert!((m[0] - 3.0).abs() < 1e-15);
        assert!(m[1].abs() < 1e-15);
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..=64).prop_flat_map(|d| {
            (
                prop::collection::vec(-1e3f64..1e3, d),
                prop::collection::vec(-1e3f64..1e3, d),
            )
        })
    }

    proptest! {
        #[test]
        fn self_dot_is_norm_squared((a, _b) in vec_pair()) {
            let x = DenseVector::new(a).unwrap();
            let d = x.dot(&x).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!((d - x.norm() * x.norm()).abs() <= 1e-9 * d.max(1.0));
        }

        #[test]
        fn ops_preserve_arity_and_finiteness((a, b) in vec_pair()) {
            let x = DenseVector::new(a).unwrap();
            let y = DenseVector::new(b).unwrap();
            let s = x.add(&y).unwrap();
            let t = x.sub(&y).unwrap();
            prop_assert_eq!(s.dim(), x.dim());
            prop_assert_eq!(t.dim(), x.dim());
            prop_assert!(s.is_finite() && t.is_finite() && x.scale(-2.5).is_finite());
            // Cauchy-Schwarz
            prop_assert!(x.dot(&y).unwrap().abs() <= x.norm() * y.norm() * (1.0 + 1e-12) + 1e-9);
        }
    }
}
