//! Reference forecasters: last-value persistence and per-feature ridge AR.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Repeats the last row of `history` `horizon` times.
pub fn persistence_predict(history: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<f64>>> {
    let Some(last) = history.last() else {
        bail!(Argument, "persistence needs at least one frame");
    };
    Ok(vec![last.clone(); horizon])
}

/// Independent autoregressive predictor per feature, no intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct ArModel {
    pub order: usize,
    /// `coeffs[f][k]` weights lag `k + 1` of feature `f`.
    pub coeffs: Vec<Vec<f64>>,
}

/// Least-squares fit of `x_t = sum_k a_k x_{t-1-k}` per feature, with
/// `ridge * I` added to the normal equations.
pub fn ar_fit(series: &[Vec<f64>], order: usize, ridge: f64) -> Result<ArModel> {
    if order == 0 {
        bail!(Argument, "AR order must be positive");
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        bail!(Argument, "ridge must be a finite non-negative number");
    }
    if series.len() <= order {
        bail!(Argument, "{} frames are not enough for order {}", series.len(), order);
    }
    let dim = series[0].len();
    if series.iter().any(|r| r.len() != dim) {
        bail!(Argument, "rows have differing lengths");
    }
    let mut coeffs = Vec::with_capacity(dim);
    for f in 0..dim {
        let mut gram = vec![0.0; order * order];
        let mut rhs = vec![0.0; order];
        for t in order..series.len() {
            let target = series[t][f];
            for i in 0..order {
                let xi = series[t - 1 - i][f];
                rhs[i] += xi * target;
                for j in 0..order {
                    gram[i * order + j] += xi * series[t - 1 - j][f];
                }
            }
        }
        for i in 0..order {
            gram[i * order + i] += ridge;
        }
        coeffs
            .push(solve_spd(&gram, &rhs, order).map_err(|_| {
                crate::Error::Numerical(alloc::format!("singular AR normal equations for feature {f}"))
            })?);
    }
    Ok(ArModel { order, coeffs })
}

/// Iterates the fitted recursion `horizon` steps past the end of `history`.
pub fn ar_predict(model: &ArModel, history: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<f64>>> {
    if history.len() < model.order {
        bail!(Argument, "history shorter than AR order {}", model.order);
    }
    let dim = model.coeffs.len();
    let mut buf: Vec<Vec<f64>> = history[history.len() - model.order..].to_vec();
    if buf.iter().any(|r| r.len() != dim) {
        bail!(Argument, "history width does not match the AR model");
    }
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let n = buf.len();
        let next: Vec<f64> = (0..dim)
            .map(|f| (0..model.order).map(|k| model.coeffs[f][k] * buf[n - 1 - k][f]).sum())
            .collect();
        buf.push(next.clone());
        out.push(next);
    }
    Ok(out)
}

/// Cholesky solve of a symmetric positive definite system.
fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max);
    let tol = 1e-12 * max_diag;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > tol) {
            bail!(Numerical, "matrix is not positive definite");
        }
        let dj = libm::sqrt(d);
        l[j * n + j] = dj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / dj;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rmse(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let n = a.len() as f64;
        let s: f64 = a
            .iter()
            .zip(b)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)))
            .sum();
        libm::sqrt(s / n)
    }

    #[test]
    fn persistence_on_constant_is_exact() {
        let hist = vec![vec![2.0, -1.0]; 5];
        let p = persistence_predict(&hist, 4).unwrap();
        assert_eq!(rmse(&p, &vec![vec![2.0, -1.0]; 4]), 0.0);
    }

    #[test]
    fn persistence_on_ramp_matches_closed_form() {
        let s = 0.37;
        let series: Vec<Vec<f64>> = (0..20).map(|t| vec![s * t as f64]).collect();
        let m = 6;
        let pred = persistence_predict(&series[..10], m).unwrap();
        let got = rmse(&pred, &series[10..10 + m]);
        let sum_k2: f64 = (1..=m).map(|k| (k * k) as f64).sum();
        let want = s * libm::sqrt(sum_k2 / m as f64);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn ar2_coefficients_recovered() {
        let mut series = vec![vec![1.0], vec![0.5]];
        for t in 2..60 {
            let v = 1.2 * series[t - 1][0] - 0.4 * series[t - 2][0];
            series.push(vec![v]);
        }
        let m = ar_fit(&series, 2, 0.0).unwrap();
        assert!((m.coeffs[0][0] - 1.2).abs() < 1e-6);
        assert!((m.coeffs[0][1] + 0.4).abs() < 1e-6);
        let pred = ar_predict(&m, &series[..40], 5).unwrap();
        for (p, t) in pred.iter().zip(&series[40..45]) {
            assert!((p[0] - t[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_without_ridge_is_rejected() {
        let series = vec![vec![0.0]; 10];
        assert!(matches!(ar_fit(&series, 2, 0.0), Err(crate::Error::Numerical(_))));
        assert!(ar_fit(&series, 2, 1e-3).is_ok());
    }
}
