//! Projected limited-memory BFGS for box-constrained smooth problems.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LbfgsConfig {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the projected gradient's largest entry falls below this.
    pub pgtol: f64,
    /// Stop when the relative decrease of the objective falls below this.
    pub ftol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 15000,
            pgtol: 1e-5,
            ftol: 2.220446049250313e-9,
        }
    }
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest entry of the projected gradient x - P(x - g).
fn pg_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((&x, &g), (&l, &h))| (x - (x - g).clamp(l, h)).abs())
        .fold(0.0, f64::max)
}

/// Minimizes `f` over the box [lo, hi]. `f` writes the gradient into its
/// second argument and returns the value.
pub(crate) fn minimize<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], cfg: &LbfgsConfig) -> Vec<f64>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut it = 0;
    while it < cfg.max_iter {
        if pg_norm(&x, &g, lo, hi) <= cfg.pgtol {
            break;
        }
        it += 1;
        // variables held at a bound by the gradient stay fixed this step
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let mut d: Vec<f64> = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        // two-loop recursion
        let mut a = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let ai = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= ai * yi;
            }
            a.push(ai);
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), ai) in mem.iter().zip(a.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (ai - b) * si;
            }
        }
        for i in 0..n {
            if !free[i] {
                d[i] = 0.0;
            }
        }
        if dot(&d, &g) >= 0.0 {
            mem.clear();
            d = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        }
        // backtracking along the projected path
        let mut t = if mem.is_empty() {
            1.0 / g.iter().map(|v| v.abs()).fold(1.0, f64::max)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..n {
                xn[i] = x[i] + t * d[i];
            }
            project(&mut xn, lo, hi);
            let step: f64 = (0..n).map(|i| g[i] * (xn[i] - x[i])).sum();
            let fnew = f(&xn, &mut gn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * step {
                accepted = Some(fnew);
                break;
            }
            t *= 0.5;
        }
        let Some(fnew) = accepted else {
            break;
        };
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if mem.len() == cfg.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let rel = (fx - fnew) / fx.abs().max(fnew.abs()).max(1.0);
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut g, &mut gn);
        fx = fnew;
        if rel <= cfg.ftol {
            break;
        }
    }
    x
}
