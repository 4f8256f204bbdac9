//! Linear NOTEARS: least squares with an l1 penalty under the smooth
//! acyclicity constraint h(W) = tr(exp(W∘W)) - d = 0.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lbfgs::{minimize, LbfgsConfig};
use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::graph::{Dag, NodeId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotearsConfig {
    pub lambda1: f64,
    pub max_iter: usize,
    pub h_tol: f64,
    pub rho_max: f64,
    pub w_threshold: f64,
    /// Inner solver limits.
    pub inner_max_iter: usize,
    pub inner_pgtol: f64,
    pub inner_ftol: f64,
}

impl Default for NotearsConfig {
    fn default() -> Self {
        let inner = LbfgsConfig::default();
        Self {
            lambda1: 0.1,
            max_iter: 100,
            h_tol: 1e-8,
            rho_max: 1e16,
            w_threshold: 0.3,
            inner_max_iter: inner.max_iter,
            inner_pgtol: inner.pgtol,
            inner_ftol: inner.ftol,
        }
    }
}

/// NOTEARS output: the raw weights and the thresholded, acyclic support.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAdjacency {
    pub nodes: Vec<NodeId>,
    /// Weights before thresholding; `w[(i, j)]` is the edge i -> j.
    pub w: DMatrix<f64>,
    /// Weights after thresholding and cycle pruning.
    pub thresholded: DMatrix<f64>,
    pub threshold: f64,
    /// h at the raw weights.
    pub h: f64,
    pub rho: f64,
    /// False when the penalty reached `rho_max` (or the iteration cap)
    /// with h still above `h_tol`.
    pub converged: bool,
    /// Edges removed from cycles after thresholding, with their weights.
    pub pruned: Vec<(usize, usize, f64)>,
}

impl WeightedAdjacency {
    pub fn dag(&self) -> Result<Dag> {
        Dag::from_adjacency(self.nodes.clone(), &self.thresholded)
    }
}

/// h(W) and its gradient 2 exp(W∘W)ᵀ ∘ W.
pub fn acyclicity(w: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let d = w.nrows();
    let e = w.component_mul(w).exp();
    let h = e.trace() - d as f64;
    let grad = e.transpose().component_mul(w) * 2.0;
    (h, grad)
}

pub fn notears_linear(data: &DatasetTable, cfg: &NotearsConfig) -> Result<WeightedAdjacency> {
    let d = data.n_cols();
    let n = data.n_rows();
    if d == 0 || n == 0 {
        return Err(Error::Input("NOTEARS needs a nonempty table".into()));
    }
    if !(cfg.w_threshold >= 0.0 && cfg.lambda1 >= 0.0 && cfg.h_tol > 0.0 && cfg.rho_max > 0.0) {
        return Err(Error::Input("invalid NOTEARS configuration".into()));
    }
    let mut x = data.to_matrix();
    for mut c in x.column_iter_mut() {
        let m = c.mean();
        c.add_scalar_mut(-m);
    }
    let nf = n as f64;
    let cov = x.transpose() * &x / nf;
    let dd = d * d;
    let unpack = |v: &[f64]| DMatrix::from_fn(d, d, |i, j| v[i * d + j] - v[dd + i * d + j]);

    let mut lo = vec![0.0; 2 * dd];
    let mut hi = vec![f64::INFINITY; 2 * dd];
    for i in 0..d {
        hi[i * d + i] = 0.0;
        hi[dd + i * d + i] = 0.0;
        lo[i * d + i] = 0.0;
    }
    let inner = LbfgsConfig {
        max_iter: cfg.inner_max_iter,
        pgtol: cfg.inner_pgtol,
        ftol: cfg.inner_ftol,
        ..LbfgsConfig::default()
    };

    let mut v = vec![0.0; 2 * dd];
    let (mut rho, mut alpha, mut h) = (1.0, 0.0, f64::INFINITY);
    let mut done = false;
    for _ in 0..cfg.max_iter {
        let mut v_new;
        let mut h_new;
        loop {
            let obj = |v: &[f64], g: &mut [f64]| {
                let w = unpack(v);
                // loss = tr((I - W)ᵀ C (I - W)) / 2 with C the sample covariance
                let iw = DMatrix::identity(d, d) - &w;
                let ciw = &cov * &iw;
                let loss = 0.5 * iw.component_mul(&ciw).sum();
                let (hv, gh) = acyclicity(&w);
                let smooth = -ciw + gh * (rho * hv + alpha);
                for i in 0..d {
                    for j in 0..d {
                        let s = smooth[(i, j)];
                        g[i * d + j] = s + cfg.lambda1;
                        g[dd + i * d + j] = -s + cfg.lambda1;
                    }
                }
                loss + 0.5 * rho * hv * hv + alpha * hv + cfg.lambda1 * v.iter().sum::<f64>()
            };
            v_new = minimize(obj, &v, &lo, &hi, &inner);
            h_new = acyclicity(&unpack(&v_new)).0;
            if h_new > 0.25 * h && rho < cfg.rho_max {
                rho *= 10.0;
            } else {
                break;
            }
        }
        v = v_new;
        h = h_new;
        alpha += rho * h;
        if h <= cfg.h_tol || rho >= cfg.rho_max {
            done = h <= cfg.h_tol;
            break;
        }
    }
    let w = unpack(&v);
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("NOTEARS weights diverged".into()));
    }
    let mut t = w.map(|x| if x.abs() < cfg.w_threshold { 0.0 } else { x });
    let pruned = prune_cycles(&mut t);
    Ok(WeightedAdjacency {
        nodes: data.names().to_vec(),
        w,
        thresholded: t,
        threshold: cfg.w_threshold,
        h,
        rho,
        converged: done,
        pruned,
    })
}

/// Removes the weakest edge of some cycle until the support is acyclic.
fn prune_cycles(w: &mut DMatrix<f64>) -> Vec<(usize, usize, f64)> {
    let mut removed = Vec::new();
    while let Some(cycle) = find_cycle(w) {
        let k = (0..cycle.len())
            .min_by(|&a, &b| {
                let ea = w[(cycle[a], cycle[(a + 1) % cycle.len()])].abs();
                let eb = w[(cycle[b], cycle[(b + 1) % cycle.len()])].abs();
                ea.total_cmp(&eb)
            })
            .unwrap();
        let (i, j) = (cycle[k], cycle[(k + 1) % cycle.len()]);
        removed.push((i, j, w[(i, j)]));
        w[(i, j)] = 0.0;
    }
    removed
}

/// A directed cycle in the support of `w`, as a node sequence.
fn find_cycle(w: &DMatrix<f64>) -> Option<Vec<usize>> {
    let d = w.nrows();
    // 0 unvisited, 1 on stack, 2 done
    let mut state = vec![0u8; d];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for s in 0..d {
        if state[s] != 0 {
            continue;
        }
        stack.push((s, 0));
        state[s] = 1;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if *next == d {
                state[u] = 2;
                stack.pop();
                continue;
            }
            let v = *next;
            *next += 1;
            if w[(u, v)] == 0.0 {
                continue;
            }
            match state[v] {
                0 => {
                    state[v] = 1;
                    stack.push((v, 0));
                }
                1 => {
                    let start = stack.iter().position(|&(x, _)| x == v).unwrap();
                    return Some(stack[start..].iter().map(|&(x, _)| x).collect());
                }
                _ => {}
            }
        }
    }
    None
}
