//! Minimization and variational-inequality problem types, plus sampled
//! checkers for the structural assumptions the convergence theory relies on.
//!
//! Assumptions are only required on a bounded set. Every problem declares a
//! radius `R >= ||x0 - x*||` and the checkers sample the ball `B_{4R}(x*)`,
//! which is the largest working set any of the schedules needs.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::{sample_in_ball, RngStream};
use crate::vector::{dist_sq_slices, dot_slices, DenseVector};

/// Absolute tolerance for "exactly zero" conditions at the solution.
pub const SOLUTION_TOL: f64 = 1e-9;

/// Multiple of the declared radius defining the assumption-check ball.
pub const CHECK_BALL_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinClass {
    Nonconvex,
    Pl,
    Convex,
    QuasiStronglyConvex,
    StronglyConvex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VipClass {
    Monotone,
    QuasiStronglyMonotone,
    StarCocoercive,
    Lipschitz,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `f(x) = 1/2 sum_i d_i (x_i - x*_i)^2`.
    DiagonalQuadratic { diag: Vec<f64> },
    /// `f(x) = sum_i x_i^2 + 3 sin^2(x_i)`.
    PlSine,
}

/// A smooth minimization problem with a known minimizer and certified
/// constants.
#[derive(Debug, Clone)]
pub struct MinProblem {
    pub objective: Objective,
    pub x_star: DenseVector,
    pub f_star: f64,
    /// Gradient Lipschitz constant.
    pub lipschitz_l: f64,
    /// PL constant, 0 if not certified.
    pub mu_pl: f64,
    /// (Quasi-)strong convexity constant, 0 if only convex or nonconvex.
    pub mu_sc: f64,
    pub tags: BTreeSet<MinClass>,
    pub x0: DenseVector,
    /// Declared radius, at least `||x0 - x*||`.
    pub radius: f64,
}

impl MinProblem {
    pub fn dim(&self) -> usize {
        self.x_star.dim()
    }

    pub fn has(&self, class: MinClass) -> bool {
        self.tags.contains(&class)
    }

    pub fn value(&self, x: &DenseVector) -> f64 {
        match &self.objective {
            Objective::DiagonalQuadratic { diag } => {
                let xs = self.x_star.as_slice();
                0.5 * x
                    .iter()
                    .zip(xs)
                    .zip(diag)
                    .map(|((a, b), d)| d * (a - b) * (a - b))
                    .sum::<f64>()
            }
            Objective::PlSine => x
                .iter()
                .map(|&t| {
                    let s = t.sin();
                    t * t + 3.0 * s * s
                })
                .sum(),
        }
    }

    pub fn gradient_into(&self, x: &DenseVector, out: &mut DenseVector) {
        match &self.objective {
            Objective::DiagonalQuadratic { diag } => {
                let xs = self.x_star.as_slice();
                for (((o, a), b), d) in out.as_mut_slice().iter_mut().zip(x.iter()).zip(xs).zip(diag) {
                    *o = d * (a - b);
                }
            }
            Objective::PlSine => {
                for (o, &t) in out.as_mut_slice().iter_mut().zip(x.iter()) {
                    *o = 2.0 * t + 3.0 * (2.0 * t).sin();
                }
            }
        }
    }

    pub fn gradient(&self, x: &DenseVector) -> DenseVector {
        let mut g = DenseVector::zeros(self.dim());
        self.gradient_into(x, &mut g);
        g
    }

    /// `f(x0) - f*`, the default initial-gap bound.
    pub fn initial_gap(&self) -> f64 {
        self.value(&self.x0) - self.f_star
    }

    /// Checks every assumption implied by the declared tags on `n` sampled
    /// points (or pairs) of `B_{4R}(x*)`, using the declared constants.
    pub fn verify_assumptions(&self, n: usize, rng: &mut RngStream) -> Result<Vec<AssumptionCheck>> {
        let r = CHECK_BALL_FACTOR * self.radius;
        let mut out = vec![self.check_optimality(), self.check_lipschitz(self.lipschitz_l, r, n, rng)?];
        if self.has(MinClass::Pl) {
            out.push(self.check_pl(self.mu_pl, r, n, rng)?);
        }
        if self.has(MinClass::Convex) {
            let mu = if self.has(MinClass::StronglyConvex) { self.mu_sc } else { 0.0 };
            out.push(self.check_strong_convexity(mu, r, n, rng)?);
        }
        if self.has(MinClass::QuasiStronglyConvex) {
            out.push(self.check_qsc(self.mu_sc, r, n, rng)?);
        }
        Ok(out)
    }

    pub fn check_optimality(&self) -> AssumptionCheck {
        let gap = (self.value(&self.x_star) - self.f_star).abs();
        let g = self.gradient(&self.x_star).norm();
        let worst = gap.max(g);
        AssumptionCheck {
            assumption: Assumption::Optimality,
            samples: 1,
            worst_excess: worst - SOLUTION_TOL,
            holds: worst <= SOLUTION_TOL,
        }
    }

    /// `||grad f(x) - grad f(y)|| <= constant * ||x - y||` on sampled pairs.
    pub fn check_lipschitz(&self, constant: f64, ball: f64, n: usize, rng: &mut RngStream) -> Result<AssumptionCheck> {
        let mut gx = DenseVector::zeros(self.dim());
        let mut gy = DenseVector::zeros(self.dim());
        sample_check(Assumption::Lipschitz, n, |_| {
            let x = sample_in_ball(&self.x_star, ball, rng)?;
            let y = sample_in_ball(&self.x_star, ball, rng)?;
            self.gradient_into(&x, &mut gx);
            self.gradient_into(&y, &mut gy);
            let lhs = dist_sq_slices(gx.as_slice(), gy.as_slice()).sqrt();
            let rhs = constant * x.distance(&y)?;
            Ok((lhs, rhs))
        })
    }

    /// `||grad f(x)||^2 >= 2 mu (f(x) - f*)`.
    pub fn check_pl(&self, mu: f64, ball: f64, n: usize, rng: &mut RngStream) -> Result<AssumptionCheck> {
        sample_check(Assumption::PolyakLojasiewicz, n, |_| {
            let x = sample_in_ball(&self.x_star, ball, rng)?;
            let g = self.gradient(&x);
            Ok((2.0 * mu * (self.value(&x) - self.f_star), g.norm_sq()))
        })
    }

    /// `f* >= f(x) + <grad f(x), x* - x> + mu/2 ||x - x*||^2`.
    pub fn check_qsc(&self, mu: f64, ball: f64, n: usize, rng: &mut RngStream) -> Result<AssumptionCheck> {
        sample_check(Assumption::QuasiStrongConvexity, n, |_| {
            let x = sample_in_ball(&self.x_star, ball, rng)?;
            let g = self.gradient(&x);
            let diff = self.x_star.sub(&x)?;
            let rhs_side = self.value(&x) + g.dot(&diff)? + 0.5 * mu * diff.norm_sq();
            Ok((rhs_side, self.f_star))
        })
    }

    /// `f(y) >= f(x) + <grad f(x), y - x> + mu/2 ||y - x||^2` on sampled pairs.
    pub fn check_strong_convexity(&self, mu: f64, ball: f64, n: usize, rng: &mut RngStream) -> Result<AssumptionCheck> {
        sample_check(Assumption::StrongConvexity, n, |_| {
            let x = sample_in_ball(&self.x_star, ball, rng)?;
            let y = sample_in_ball(&self.x_star, ball, rng)?;
            let g = self.gradient(&x);
            let diff = y.sub(&x)?;
            let lower = self.value(&x) + g.dot(&diff)? + 0.5 * mu * diff.norm_sq();
            Ok((lower, self.value(&y)))
        })
    }
}

/// An affine variational inequality `F(x) = M (x - x*)` with certified
/// constants.
#[derive(Debug, Clone)]
pub struct VipProblem {
    pub matrix: DMatrix<f64>,
    pub x_star: DenseVector,
    pub lipschitz_l: f64,
    pub mu_qsm: f64,
    pub ell_coco: f64,
    pub tags: BTreeSet<VipClass>,
    pub x0: DenseVector,
    pub radius: f64,
}

impl VipProblem {
    pub fn dim(&self) -> usize {
        self.x_star.dim()
    }

    pub fn has(&self, class: VipClass) -> bool {
        self.tags.contains(&class)
    }

    pub fn operator_into(&self, x: &DenseVector, out: &mut DenseVector) {
        let d = self.dim();
        let xs = self.x_star.as_slice();
        let o = out.as_mut_slice();
        o.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..d {
            let u = x[j] - xs[j];
            if u == 0.0 {
                continue;
            }
            let col = self.matrix.column(j);
            for i in 0..d {
                o[i] += col[i] * u;
            }
        }
    }

    pub fn operator(&self, x: &DenseVector) -> DenseVector {
        let mut out = DenseVector::zeros(self.dim());
        self.operator_into(x, &mut out);
        out
    }

    pub fn verify_assumptions(&self, n: usize, rng: &mut RngStream) -> Result<Vec<AssumptionCheck>> {
        let r = CHECK_BALL_FACTOR * self.radius;
        let mut out = vec![self.check_solution()];
        if self.has(VipClass::Lipschitz) {
            out.push(self.check_lipschitz(self.lipschitz_l, r, n, rng)?);
        }
        if self.has(VipClass::Monotone) {
            out.push(self.check_monotone(r, n, rng)?);
        }
        if self.has(VipClass::QuasiStronglyMonotone) {
            out.push(self.check_qsm(self.mu_qsm, r, n, rng)?);
        }
        if self.has(VipClass::StarCocoercive) {
            out.push(self.check_star_cocoercive(self.ell_coco, r, n, rng)?);
        }
        Ok(out)
    }

    pub fn check_solution(&self) -> AssumptionCheck {
        let g = self.operator(&self.x_star).norm();
        AssumptionCheck {
            assumption: Assumption::Optimality,
            samples: 1,
            worst_excess: g - SOLUTION_TOL,
            holds: g <= SOLUTION_TOL,
        }
    }

    pub fn check_lipschitz(&self, constant: f64, ball: f64, n: usize, rng: &mut RngStream) -> Result<AssumptionCheck> {
        sample_check(Assumption::Lipschitz, n, |_| {
            let x = sample_in_ball(&self.x_star, ball, rng)?;
            let y = sample_in_ball(&self.x_star, ball, rng)?;
            let lhs = self.operator(&x).distance(&self.operator(&y))?;
            Ok((lhs, constant * x.distance(&y)?))
        })
    }

    /// `<F(x) - F(y), x - y> >= 0`.
    pub fn check_monotone(&self, ball: f64, n: usize, rng: &mut RngStream) -> Result<AssumptionCheck> {
        sample_check(Assumption::Monotone, n, |_| {
            let x = sample_in_ball(&self.x_star, ball, rng)?;
            let y = sample_in_ball(&self.x_star, ball, rng)?;
            let df = self.operator(&x).sub(&self.operator(&y))?;
            let inner = df.dot(&x.sub(&y)?)?;
            Ok((-inner, 0.0))
        })
    }

    /// `<F(x), x - x*> >= mu ||x - x*||^2`.
    pub fn check_qsm(&self, mu: f64, ball: f64, n: usize, rng: &mut RngStream) -> Result<AssumptionCheck> {
        sample_check(Assumption::QuasiStrongMonotone, n, |_| {
            let x = sample_in_ball(&self.x_star, ball, rng)?;
            let f = self.operator(&x);
            let diff = x.sub(&self.x_star)?;
            Ok((mu * diff.norm_sq(), f.dot(&diff)?))
        })
    }

    /// `||F(x)||^2 <= ell <F(x), x - x*>`.
    pub fn check_star_cocoercive(&self, ell: f64, ball: f64, n: usize, rng: &mut RngStream) -> Result<AssumptionCheck> {
        sample_check(Assumption::StarCocoercive, n, |_| {
            let x = sample_in_ball(&self.x_star, ball, rng)?;
            let f = self.operator(&x);
            let diff = x.sub(&self.x_star)?;
            Ok((f.norm_sq(), ell * dot_slices(f.as_slice(), diff.as_slice())))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    Optimality,
    Lipschitz,
    PolyakLojasiewicz,
    QuasiStrongConvexity,
    StrongConvexity,
    Monotone,
    QuasiStrongMonotone,
    StarCocoercive,
}

/// Outcome of a sampled assumption check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub samples: usize,
    /// Largest observed `lhs - rhs` for an inequality of the form `lhs <= rhs`.
    pub worst_excess: f64,
    pub holds: bool,
}

/// Relative slack for floating-point round-off in sampled inequality checks.
const CHECK_REL_TOL: f64 = 1e-9;

fn sample_check(
    assumption: Assumption,
    n: usize,
    mut draw: impl FnMut(usize) -> Result<(f64, f64)>,
) -> Result<AssumptionCheck> {
    let mut worst = f64::NEG_INFINITY;
    let mut holds = true;
    for i in 0..n {
        let (lhs, rhs) = draw(i)?;
        let excess = lhs - rhs;
        worst = worst.max(excess);
        if excess > CHECK_REL_TOL * (lhs.abs() + rhs.abs()) + 1e-12 {
            holds = false;
        }
    }
    Ok(AssumptionCheck {
        assumption,
        samples: n,
        worst_excess: worst,
        holds,
    })
}
