//! Lasso by coordinate descent with the penalty chosen by BIC.

use nalgebra::{DMatrix, DVector};

const GRID: usize = 30;
const GRID_RATIO: f64 = 1e-3;
const TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 1000;

/// Lasso path on standardized predictors. Returns the indices of the
/// predictors whose coefficients are nonzero at the BIC-best penalty, where
/// BIC is computed from an unpenalized refit on each active set.
pub(crate) fn bic_support(y: &[f64], xs: &[&[f64]]) -> Vec<usize> {
    let n = y.len();
    if n < 3 || xs.is_empty() {
        return Vec::new();
    }
    let nf = n as f64;
    let ym = y.iter().sum::<f64>() / nf;
    let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
    // standardized copies; constant predictors are left out
    let mut keep = Vec::new();
    let mut z: Vec<Vec<f64>> = Vec::new();
    for (k, x) in xs.iter().enumerate() {
        let m = x.iter().sum::<f64>() / nf;
        let sd = (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / nf).sqrt();
        if sd > 1e-12 {
            keep.push(k);
            z.push(x.iter().map(|v| (v - m) / sd).collect());
        }
    }
    let p = z.len();
    let rss0: f64 = yc.iter().map(|v| v * v).sum();
    if p == 0 || rss0 <= 0.0 {
        return Vec::new();
    }
    let corr: Vec<f64> = z.iter().map(|c| dot(c, &yc) / nf).collect();
    let lmax = corr.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if lmax <= 0.0 {
        return Vec::new();
    }

    let bic = |support: &[usize]| -> f64 {
        let rss = ols_rss(&yc, &z, support).unwrap_or(f64::INFINITY).max(1e-300 * rss0);
        nf * (rss / nf).ln() + support.len() as f64 * nf.ln()
    };
    let mut best: Vec<usize> = Vec::new();
    let mut best_bic = bic(&[]);

    let mut beta = vec![0.0; p];
    let mut resid = yc.clone();
    for g in 0..GRID {
        let lambda = lmax * GRID_RATIO.powf(g as f64 / (GRID - 1) as f64);
        for _ in 0..MAX_SWEEPS {
            let mut delta = 0.0f64;
            for k in 0..p {
                let old = beta[k];
                let rho = dot(&z[k], &resid) / nf + old;
                let new = soft(rho, lambda);
                if new != old {
                    let d = new - old;
                    for (r, x) in resid.iter_mut().zip(&z[k]) {
                        *r -= d * x;
                    }
                    beta[k] = new;
                    delta = delta.max(d.abs());
                }
            }
            if delta < TOL {
                break;
            }
        }
        let support: Vec<usize> = (0..p).filter(|&k| beta[k] != 0.0).collect();
        if support.len() >= n - 1 {
            break;
        }
        let b = bic(&support);
        if b < best_bic - 1e-12 {
            best_bic = b;
            best = support;
        }
    }
    best.into_iter().map(|k| keep[k]).collect()
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Residual sum of squares of the least-squares fit of `y` on the given
/// columns.
fn ols_rss(y: &[f64], z: &[Vec<f64>], support: &[usize]) -> Option<f64> {
    if support.is_empty() {
        return Some(y.iter().map(|v| v * v).sum());
    }
    let n = y.len();
    let x = DMatrix::from_fn(n, support.len(), |r, c| z[support[c]][r]);
    let yv = DVector::from_column_slice(y);
    let coef = x.clone().svd(true, true).solve(&yv, 1e-12).ok()?;
    let r = yv - x * coef;
    Some(r.norm_squared())
}
