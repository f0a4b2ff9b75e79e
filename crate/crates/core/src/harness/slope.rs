use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Least-squares fit of `ln v = c + s ln K`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 4 {
        return Err(contract(format!("slope fit needs at least 4 points, got {}", points.len())));
    }
    if points.iter().any(|&(k, v)| !(k > 0.0) || !(v > 0.0)) {
        return Err(contract("slope fit needs positive abscissae and values"));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(contract("slope fit needs at least two distinct abscissae"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, intercept, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ks() -> Vec<f64> {
        (4..12).map(|i| 2f64.powi(i)).collect()
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = ks().into_iter().map(|k| (k, k.powf(-0.5))).collect();
        let f = fit_loglog_slope(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!(f.stderr < 1e-10);
    }

    #[test]
    fn constant_and_inverse() {
        let c: Vec<_> = ks().into_iter().map(|k| (k, 7.0)).collect();
        assert!(fit_loglog_slope(&c).unwrap().slope.abs() < 1e-12);
        let inv: Vec<_> = ks().into_iter().map(|k| (k, 3.0 / k)).collect();
        assert!((fit_loglog_slope(&inv).unwrap().slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_loglog_slope(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]).is_err());
        assert!(fit_loglog_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0)]).is_err());
    }
}
