//! Problem zoo: instances with closed-form solutions and exact constants.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::problem::{MinClass, MinProblem, Objective, VipClass, VipProblem};
use crate::rng::{sample_in_ball, RngStream};
use crate::vector::DenseVector;

/// PL constant of `x^2 + 3 sin^2 x`: the minimum of `f'(x)^2 / (2 f(x))` over
/// a `1e-4` grid on `[-10, 10]` (about 0.175531, attained near `x = -2.2017`)
/// reduced by 10%.
pub const PL_SINE_MU: f64 = 0.157977;

/// Gradient Lipschitz constant of `x^2 + 3 sin^2 x` (`f'' = 2 + 6 cos 2x`).
pub const PL_SINE_L: f64 = 8.0;

/// Serializable description of a problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    QuadraticMin {
        dim: usize,
        mu: f64,
        l: f64,
        #[serde(default)]
        x_star: Option<Vec<f64>>,
        #[serde(default)]
        x0: Option<Vec<f64>>,
        #[serde(default)]
        radius: Option<f64>,
    },
    PlSine {
        dim: usize,
        #[serde(default)]
        x0: Option<Vec<f64>>,
        #[serde(default)]
        radius: Option<f64>,
    },
    /// `f(x) = mu x^2 / 2` on the real line.
    Counterexample1d { mu: f64, x0: f64 },
    SkewBilinear {
        dim: usize,
        l: f64,
        #[serde(default)]
        x0: Option<Vec<f64>>,
        #[serde(default)]
        radius: Option<f64>,
    },
    StrongAffineVip {
        dim: usize,
        mu: f64,
        l: f64,
        #[serde(default)]
        x0: Option<Vec<f64>>,
        #[serde(default)]
        radius: Option<f64>,
    },
    CocoerciveAffineVip {
        dim: usize,
        ell: f64,
        #[serde(default)]
        mu: Option<f64>,
        #[serde(default)]
        x0: Option<Vec<f64>>,
        #[serde(default)]
        radius: Option<f64>,
    },
}

#[derive(Debug, Clone)]
pub enum Problem {
    Min(MinProblem),
    Vip(VipProblem),
}

impl Problem {
    pub fn dim(&self) -> usize {
        match self {
            Problem::Min(p) => p.dim(),
            Problem::Vip(p) => p.dim(),
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            Problem::Min(p) => p.radius,
            Problem::Vip(p) => p.radius,
        }
    }

    pub fn as_min(&self) -> Option<&MinProblem> {
        match self {
            Problem::Min(p) => Some(p),
            Problem::Vip(_) => None,
        }
    }

    pub fn as_vip(&self) -> Option<&VipProblem> {
        match self {
            Problem::Vip(p) => Some(p),
            Problem::Min(_) => None,
        }
    }
}

impl ProblemConfig {
    /// Builds the instance. Random parts (spectrum, rotation, `x*`, default
    /// `x0`) are drawn from `rng`.
    pub fn build(&self, rng: &mut RngStream) -> Result<Problem> {
        let vec = |v: &Option<Vec<f64>>| v.as_ref().map(|c| DenseVector::from_slice(c)).transpose();
        Ok(match self {
            ProblemConfig::QuadraticMin { dim, mu, l, x_star, x0, radius } => {
                let xs = vec(x_star)?;
                Problem::Min(make_quadratic_min(*dim, *mu, *l, xs, vec(x0)?, *radius, rng)?)
            }
            ProblemConfig::PlSine { dim, x0, radius } => Problem::Min(make_pl_sine(*dim, vec(x0)?, *radius, rng)?),
            ProblemConfig::Counterexample1d { mu, x0 } => Problem::Min(make_counterexample_1d(*mu, *x0)?),
            ProblemConfig::SkewBilinear { dim, l, x0, radius } => {
                Problem::Vip(make_skew_bilinear(*dim, *l, vec(x0)?, *radius, rng)?)
            }
            ProblemConfig::StrongAffineVip { dim, mu, l, x0, radius } => {
                Problem::Vip(make_strong_affine_vip(*dim, *mu, *l, vec(x0)?, *radius, rng)?)
            }
            ProblemConfig::CocoerciveAffineVip { dim, ell, mu, x0, radius } => {
                Problem::Vip(make_cocoercive_affine_vip(*dim, *ell, *mu, vec(x0)?, *radius, rng)?)
            }
        })
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(config("problem dimension must be positive"));
    }
    Ok(())
}

/// Resolves the starting point and certified radius. Without `x0` the start is
/// `x*` plus a uniformly random unit vector.
fn start_and_radius(
    x_star: &DenseVector,
    x0: Option<DenseVector>,
    radius: Option<f64>,
    rng: &mut RngStream,
) -> Result<(DenseVector, f64)> {
    let x0 = match x0 {
        Some(x) => {
            if x.dim() != x_star.dim() {
                return Err(config(format!("x0 has dimension {}, expected {}", x.dim(), x_star.dim())));
            }
            x
        }
        None => {
            let mut dir = vec![0.0; x_star.dim()];
            rng.fill_unit_direction(&mut dir);
            let mut x = x_star.clone();
            for (a, u) in x.as_mut_slice().iter_mut().zip(&dir) {
                *a += u;
            }
            x
        }
    };
    let dist = x0.distance(x_star)?;
    let r = match radius {
        Some(r) if r < dist => {
            return Err(config(format!("radius {r} is smaller than ||x0 - x*|| = {dist}")));
        }
        Some(r) => r,
        None => dist,
    };
    if !(r > 0.0) || !r.is_finite() {
        return Err(config("radius must be positive; pass an explicit radius when x0 = x*"));
    }
    Ok((x0, r))
}

/// Haar-random orthogonal matrix from the QR factorization of a Gaussian matrix.
fn random_orthogonal(dim: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.standard_normal());
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `Q blockdiag(s J, ..., s J) Q^T` with `J = [[0, 1], [-1, 0]]`; an odd
/// trailing coordinate gets a zero block.
fn rotated_skew(dim: usize, s: f64, q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(dim, dim);
    for i in (0..dim.saturating_sub(1)).step_by(2) {
        b[(i, i + 1)] = s;
        b[(i + 1, i)] = -s;
    }
    q * b * q.transpose()
}

/// `d` values in `[lo, hi]` containing both endpoints; interior values are
/// log-uniform when `lo > 0` and uniform otherwise.
fn spread_spectrum(dim: usize, lo: f64, hi: f64, rng: &mut RngStream) -> Vec<f64> {
    if dim == 1 {
        return vec![hi];
    }
    let mut v = Vec::with_capacity(dim);
    v.push(lo);
    for _ in 1..dim - 1 {
        let u = rng.uniform();
        v.push(if lo > 0.0 { lo * (hi / lo).powf(u) } else { hi * u });
    }
    v.push(hi);
    v
}

/// `f(x) = 1/2 (x - x*)^T D (x - x*)` with diagonal spectrum in `[mu, L]`
/// containing both endpoints. Without `x_star`, the minimizer is drawn
/// uniformly from the unit ball.
pub fn make_quadratic_min(
    dim: usize,
    mu: f64,
    l: f64,
    x_star: Option<DenseVector>,
    x0: Option<DenseVector>,
    radius: Option<f64>,
    rng: &mut RngStream,
) -> Result<MinProblem> {
    check_dim(dim)?;
    if !(l > 0.0) || !(mu >= 0.0) || mu > l {
        return Err(config(format!("quadratic needs 0 <= mu <= L and L > 0, got mu = {mu}, L = {l}")));
    }
    if dim == 1 && mu != l {
        return Err(config("a one-dimensional quadratic has mu = L"));
    }
    let diag = spread_spectrum(dim, mu, l, rng);
    quadratic_from_diag(diag, x_star, x0, radius, rng)
}

/// Quadratic with an explicit nonnegative diagonal Hessian.
pub fn quadratic_from_diag(
    diag: Vec<f64>,
    x_star: Option<DenseVector>,
    x0: Option<DenseVector>,
    radius: Option<f64>,
    rng: &mut RngStream,
) -> Result<MinProblem> {
    check_dim(diag.len())?;
    if diag.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
        return Err(config("Hessian diagonal must be finite and nonnegative"));
    }
    let dim = diag.len();
    let l = diag.iter().cloned().fold(0.0, f64::max);
    let mu = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(l > 0.0) {
        return Err(config("Hessian must be nonzero"));
    }
    let x_star = match x_star {
        Some(x) if x.dim() != dim => return Err(config("x_star dimension mismatch")),
        Some(x) => x,
        None => sample_in_ball(&DenseVector::zeros(dim), 1.0, rng)?,
    };
    let (x0, radius) = start_and_radius(&x_star, x0, radius, rng)?;
    let mut tags = BTreeSet::from([MinClass::Convex]);
    if mu > 0.0 {
        tags.extend([MinClass::Pl, MinClass::QuasiStronglyConvex, MinClass::StronglyConvex]);
    }
    Ok(MinProblem {
        objective: Objective::DiagonalQuadratic { diag },
        x_star,
        f_star: 0.0,
        lipschitz_l: l,
        mu_pl: mu,
        mu_sc: mu,
        tags,
        x0,
        radius,
    })
}

/// `f(x) = mu x^2 / 2`, the one-dimensional instance used against plain SGD.
pub fn make_counterexample_1d(mu: f64, x0: f64) -> Result<MinProblem> {
    if !(mu > 0.0) {
        return Err(config("counterexample needs mu > 0"));
    }
    let radius = if x0 == 0.0 { None } else { Some(x0.abs()) };
    let radius = radius.ok_or_else(|| config("counterexample needs x0 != 0"))?;
    quadratic_from_diag(
        vec![mu],
        Some(DenseVector::zeros(1)),
        Some(DenseVector::from_slice(&[x0])?),
        Some(radius),
        &mut RngStream::new(0),
    )
}

/// Separable nonconvex PL function `f(x) = sum_i x_i^2 + 3 sin^2 x_i`.
pub fn make_pl_sine(dim: usize, x0: Option<DenseVector>, radius: Option<f64>, rng: &mut RngStream) -> Result<MinProblem> {
    check_dim(dim)?;
    let x_star = DenseVector::zeros(dim);
    let (x0, radius) = start_and_radius(&x_star, x0, radius, rng)?;
    Ok(MinProblem {
        objective: Objective::PlSine,
        x_star,
        f_star: 0.0,
        lipschitz_l: PL_SINE_L,
        mu_pl: PL_SINE_MU,
        mu_sc: 0.0,
        tags: BTreeSet::from([MinClass::Nonconvex, MinClass::Pl]),
        x0,
        radius,
    })
}

fn affine_vip(
    matrix: DMatrix<f64>,
    x0: Option<DenseVector>,
    radius: Option<f64>,
    rng: &mut RngStream,
) -> Result<(DMatrix<f64>, DenseVector, DenseVector, f64)> {
    let dim = matrix.nrows();
    let x_star = sample_in_ball(&DenseVector::zeros(dim), 1.0, rng)?;
    let (x0, r) = start_and_radius(&x_star, x0, radius, rng)?;
    Ok((matrix, x_star, x0, r))
}

/// `F(x) = A (x - x*)` with `A` skew-symmetric and `||A|| = L`.
pub fn make_skew_bilinear(
    dim: usize,
    l: f64,
    x0: Option<DenseVector>,
    radius: Option<f64>,
    rng: &mut RngStream,
) -> Result<VipProblem> {
    check_dim(dim)?;
    if dim % 2 != 0 {
        return Err(config(format!("skew bilinear problem needs an even dimension, got {dim}")));
    }
    if !(l > 0.0) {
        return Err(config("L must be positive"));
    }
    let q = random_orthogonal(dim, rng);
    let a = rotated_skew(dim, l, &q);
    let (matrix, x_star, x0, radius) = affine_vip(a, x0, radius, rng)?;
    Ok(VipProblem {
        matrix,
        x_star,
        lipschitz_l: l,
        mu_qsm: 0.0,
        ell_coco: 0.0,
        tags: BTreeSet::from([VipClass::Monotone, VipClass::Lipschitz]),
        x0,
        radius,
    })
}

/// `F(x) = (mu I + S)(x - x*)` with `S` skew and `||mu I + S|| = L`.
pub fn make_strong_affine_vip(
    dim: usize,
    mu: f64,
    l: f64,
    x0: Option<DenseVector>,
    radius: Option<f64>,
    rng: &mut RngStream,
) -> Result<VipProblem> {
    check_dim(dim)?;
    if !(mu > 0.0) || mu > l {
        return Err(config(format!("strong affine VIP needs 0 < mu <= L, got mu = {mu}, L = {l}")));
    }
    let q = random_orthogonal(dim, rng);
    let s = (l * l - mu * mu).sqrt();
    let mut m = rotated_skew(dim, s, &q);
    for i in 0..dim {
        m[(i, i)] += mu;
    }
    // With an odd dimension the zero block leaves an eigenvalue mu, so the
    // norm is still sqrt(mu^2 + s^2) = L whenever dim >= 2.
    let lip = if dim >= 2 { l } else { mu };
    let (matrix, x_star, x0, radius) = affine_vip(m, x0, radius, rng)?;
    Ok(VipProblem {
        matrix,
        x_star,
        lipschitz_l: lip,
        mu_qsm: mu,
        ell_coco: 0.0,
        tags: BTreeSet::from([VipClass::QuasiStronglyMonotone, VipClass::Lipschitz, VipClass::Monotone]),
        x0,
        radius,
    })
}

/// `F(x) = M (x - x*)` with `M` symmetric positive definite, spectrum in
/// `[mu, ell]` containing both endpoints (`mu` defaults to `ell / 10`).
pub fn make_cocoercive_affine_vip(
    dim: usize,
    ell: f64,
    mu: Option<f64>,
    x0: Option<DenseVector>,
    radius: Option<f64>,
    rng: &mut RngStream,
) -> Result<VipProblem> {
    check_dim(dim)?;
    if !(ell > 0.0) {
        return Err(config("ell must be positive"));
    }
    let mu = mu.unwrap_or(ell / 10.0);
    if !(mu > 0.0) || mu > ell {
        return Err(config(format!("cocoercive VIP needs 0 < mu <= ell, got mu = {mu}")));
    }
    let spectrum = if dim == 1 { vec![ell] } else { spread_spectrum(dim, mu, ell, rng) };
    let lambda_min = spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
    let q = random_orthogonal(dim, rng);
    let m = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(spectrum)) * q.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let (matrix, x_star, x0, radius) = affine_vip(m, x0, radius, rng)?;
    Ok(VipProblem {
        matrix,
        x_star,
        lipschitz_l: ell,
        mu_qsm: lambda_min,
        ell_coco: ell,
        tags: BTreeSet::from([
            VipClass::StarCocoercive,
            VipClass::QuasiStronglyMonotone,
            VipClass::Monotone,
            VipClass::Lipschitz,
        ]),
        x0,
        radius,
    })
}
