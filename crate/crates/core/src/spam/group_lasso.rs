//! Group-sparse additive regression on spline bases.
//!
//! Everything after the basis expansion works on sufficient statistics
//! (column sums, Gram matrix, cross products with the response), so a fold
//! split or a change of predictor subset never touches the rows again. Each
//! group is centered and orthonormalized on its training rows; in those
//! coordinates the group penalty is the plain Euclidean norm of the block and
//! the block update is an exact group soft-threshold.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::basis::SplineBasis;
use crate::error::{Error, Result};
use crate::graph::NodeId;

/// A group counts as active when its coefficient norm exceeds this.
pub const ACTIVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpamConfig {
    pub num_basis: usize,
    pub num_folds: usize,
    pub num_lambdas: usize,
    pub lambda_min_ratio: f64,
    /// Convergence threshold on the largest coefficient change in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Seed for the fold assignment.
    pub seed: u64,
}

impl Default for SpamConfig {
    fn default() -> Self {
        Self {
            num_basis: 6,
            num_folds: 5,
            num_lambdas: 50,
            lambda_min_ratio: 1e-3,
            tol: 1e-6,
            max_sweeps: 500,
            seed: 0,
        }
    }
}

/// One additive component: basis and coefficients on the raw basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineGroup {
    pub basis: SplineBasis,
    pub coef: Vec<f64>,
}

impl SplineGroup {
    pub fn is_active(&self) -> bool {
        norm(&self.coef) > ACTIVE_TOL
    }

    /// Component value at `x`; the training mean is absorbed in the
    /// model intercept.
    pub fn eval(&self, x: f64) -> f64 {
        let row = self.basis.eval(x);
        row.iter().zip(&self.coef).map(|(b, c)| b * c).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineAdditiveModel {
    pub target: NodeId,
    pub groups: Vec<(NodeId, SplineGroup)>,
    pub intercept: f64,
    pub lambda: f64,
    pub converged: bool,
    pub sweeps: usize,
}

impl SplineAdditiveModel {
    pub fn active_set(&self) -> Vec<NodeId> {
        self.groups
            .iter()
            .filter(|(_, g)| g.is_active())
            .map(|(n, _)| n.clone())
            .collect()
    }

    /// Prediction for one row given predictor values in group order.
    pub fn predict_row(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.groups.len() {
            return Err(Error::Input(format!(
                "{} predictor values for {} groups",
                values.len(),
                self.groups.len()
            )));
        }
        Ok(self.intercept
            + self
                .groups
                .iter()
                .zip(values)
                .filter(|((_, g), _)| g.is_active())
                .map(|((_, g), &x)| g.eval(x))
                .sum::<f64>())
    }
}

/// Result of cross-validated penalty selection.
#[derive(Debug, Clone, PartialEq)]
pub struct CvPath {
    pub lambdas: Vec<f64>,
    pub mean_mse: Vec<f64>,
    pub se_mse: Vec<f64>,
    pub best_index: usize,
    pub selected_index: usize,
}

impl CvPath {
    pub fn selected_lambda(&self) -> f64 {
        self.lambdas[self.selected_index]
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Row-side sufficient statistics of the raw design.
#[derive(Debug, Clone)]
pub(crate) struct XMoments {
    pub n: f64,
    pub sum_x: DVector<f64>,
    pub xtx: DMatrix<f64>,
}

/// Response-side sufficient statistics.
#[derive(Debug, Clone)]
pub(crate) struct YMoments {
    pub xty: DVector<f64>,
    pub sum_y: f64,
    pub sum_yy: f64,
}

impl XMoments {
    pub fn of(design: &DMatrix<f64>) -> Self {
        let sum_x = DVector::from_iterator(
            design.ncols(),
            (0..design.ncols()).map(|c| design.column(c).sum()),
        );
        Self {
            n: design.nrows() as f64,
            sum_x,
            xtx: design.tr_mul(design),
        }
    }

    pub fn minus(&self, other: &XMoments) -> XMoments {
        XMoments {
            n: self.n - other.n,
            sum_x: &self.sum_x - &other.sum_x,
            xtx: &self.xtx - &other.xtx,
        }
    }

    pub fn select(&self, cols: &[usize]) -> XMoments {
        XMoments {
            n: self.n,
            sum_x: self.sum_x.select_rows(cols),
            xtx: self.xtx.select_rows(cols).select_columns(cols),
        }
    }
}

impl YMoments {
    pub fn of(design: &DMatrix<f64>, y: &[f64]) -> Self {
        let yv = DVector::from_column_slice(y);
        Self {
            xty: design.tr_mul(&yv),
            sum_y: y.iter().sum(),
            sum_yy: y.iter().map(|v| v * v).sum(),
        }
    }

    pub fn minus(&self, other: &YMoments) -> YMoments {
        YMoments {
            xty: &self.xty - &other.xty,
            sum_y: self.sum_y - other.sum_y,
            sum_yy: self.sum_yy - other.sum_yy,
        }
    }

    pub fn select(&self, cols: &[usize]) -> YMoments {
        YMoments {
            xty: self.xty.select_rows(cols),
            sum_y: self.sum_y,
            sum_yy: self.sum_yy,
        }
    }
}

/// Centered, group-orthonormalized least-squares problem.
pub(crate) struct Problem {
    /// Ranges of each group in the raw design.
    raw_groups: Vec<Range<usize>>,
    /// Ranges of each group in orthonormal coordinates.
    groups: Vec<Range<usize>>,
    transforms: Vec<DMatrix<f64>>,
    gram: DMatrix<f64>,
    c: DVector<f64>,
    yy: f64,
    x_mean: DVector<f64>,
    y_mean: f64,
}

impl Problem {
    pub fn new(xm: &XMoments, ym: &YMoments, raw_groups: &[Range<usize>]) -> Result<Self> {
        let n = xm.n;
        if n < 2.0 {
            return Err(Error::Input("too few rows to fit".into()));
        }
        let x_mean = &xm.sum_x / n;
        let y_mean = ym.sum_y / n;
        let cov = &xm.xtx / n - &x_mean * x_mean.transpose();
        let cxy = &ym.xty / n - &x_mean * y_mean;
        let yy = (ym.sum_yy / n - y_mean * y_mean).max(0.0);

        let mut transforms = Vec::with_capacity(raw_groups.len());
        let mut groups = Vec::with_capacity(raw_groups.len());
        let mut offset = 0;
        for r in raw_groups {
            let block = cov.view((r.start, r.start), (r.len(), r.len())).clone_owned();
            let eig = nalgebra::SymmetricEigen::new(block);
            let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
            let keep: Vec<usize> = (0..r.len())
                .filter(|&i| eig.eigenvalues[i] > top * 1e-10 && eig.eigenvalues[i] > 1e-14)
                .collect();
            let mut t = DMatrix::zeros(r.len(), keep.len());
            for (c, &i) in keep.iter().enumerate() {
                let s = eig.eigenvalues[i].sqrt();
                for row in 0..r.len() {
                    t[(row, c)] = eig.eigenvectors[(row, i)] / s;
                }
            }
            groups.push(offset..offset + keep.len());
            offset += keep.len();
            transforms.push(t);
        }

        // Blockwise T' C T and T' c.
        let p = xm.sum_x.len();
        let mut ct = DMatrix::zeros(p, offset);
        for (g, r) in raw_groups.iter().enumerate() {
            let cols = cov.columns(r.start, r.len()) * &transforms[g];
            ct.columns_mut(groups[g].start, groups[g].len()).copy_from(&cols);
        }
        let mut gram = DMatrix::zeros(offset, offset);
        let mut c = DVector::zeros(offset);
        for (g, r) in raw_groups.iter().enumerate() {
            let tt = transforms[g].transpose();
            let rows = &tt * ct.rows(r.start, r.len());
            gram.rows_mut(groups[g].start, groups[g].len()).copy_from(&rows);
            let cg = &tt * cxy.rows(r.start, r.len());
            c.rows_mut(groups[g].start, groups[g].len()).copy_from(&cg);
        }
        // Symmetrize float dust.
        let gram = (&gram + gram.transpose()) * 0.5;

        Ok(Self {
            raw_groups: raw_groups.to_vec(),
            groups,
            transforms,
            gram,
            c,
            yy,
            x_mean,
            y_mean,
        })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// Smallest penalty at which every group is zero.
    pub fn lambda_max(&self) -> f64 {
        self.groups
            .iter()
            .map(|r| 2.0 * self.c.rows(r.start, r.len()).norm())
            .fold(0.0, f64::max)
    }

    /// Mean squared residual plus group penalty.
    pub fn objective(&self, beta: &DVector<f64>, q: &DVector<f64>, lambda: f64) -> f64 {
        let penalty: f64 = self
            .groups
            .iter()
            .map(|r| beta.rows(r.start, r.len()).norm())
            .sum();
        self.yy - 2.0 * beta.dot(&self.c) + beta.dot(q) + lambda * penalty
    }

    /// Cyclic block coordinate descent from the warm start `beta`.
    /// Returns (sweeps, converged).
    pub fn solve(&self, lambda: f64, beta: &mut DVector<f64>, tol: f64, max_sweeps: usize) -> (usize, bool) {
        let mut q = &self.gram * &*beta;
        let mut prev = self.objective(beta, &q, lambda);
        let mut r = Vec::new();
        for sweep in 1..=max_sweeps {
            let mut max_delta: f64 = 0.0;
            for range in &self.groups {
                let (s, len) = (range.start, range.len());
                r.clear();
                r.extend((s..s + len).map(|i| self.c[i] - q[i] + beta[i]));
                let rn = norm(&r);
                let shrink = if rn <= 0.5 * lambda { 0.0 } else { 1.0 - 0.5 * lambda / rn };
                for (k, i) in (s..s + len).enumerate() {
                    let new = shrink * r[k];
                    let d = new - beta[i];
                    if d != 0.0 {
                        max_delta = max_delta.max(d.abs());
                        q.axpy(d, &self.gram.column(i), 1.0);
                        beta[i] = new;
                    }
                }
            }
            let obj = self.objective(beta, &q, lambda);
            debug_assert!(
                obj <= prev + 1e-10 * (1.0 + prev.abs()),
                "objective increased from {prev} to {obj} in sweep {sweep}"
            );
            prev = obj;
            if max_delta < tol {
                return (sweep, true);
            }
        }
        (max_sweeps, false)
    }

    /// Raw-basis coefficients per group and the intercept.
    pub fn raw_coefficients(&self, beta: &DVector<f64>) -> (Vec<Vec<f64>>, f64) {
        let mut coefs = Vec::with_capacity(self.groups.len());
        let mut intercept = self.y_mean;
        for (g, r) in self.groups.iter().enumerate() {
            let b = beta.rows(r.start, r.len());
            let raw = &self.transforms[g] * b;
            let rg = &self.raw_groups[g];
            for (k, v) in raw.iter().enumerate() {
                intercept -= self.x_mean[rg.start + k] * v;
            }
            coefs.push(raw.iter().copied().collect());
        }
        (coefs, intercept)
    }
}

/// Mean squared error on rows summarized by (`xm`, `ym`) of the model given
/// by stacked raw coefficients and intercept.
pub(crate) fn heldout_mse(xm: &XMoments, ym: &YMoments, coef: &DVector<f64>, intercept: f64) -> f64 {
    let n = xm.n;
    let xtx_c = &xm.xtx * coef;
    let sse = ym.sum_yy - 2.0 * coef.dot(&ym.xty) + coef.dot(&xtx_c)
        - 2.0 * intercept * (ym.sum_y - xm.sum_x.dot(coef))
        + n * intercept * intercept;
    sse.max(0.0) / n
}

/// Expanded design over a set of predictors, with fold statistics.
pub(crate) struct Design {
    pub bases: Vec<SplineBasis>,
    pub matrix: DMatrix<f64>,
    pub num_basis: usize,
}

impl Design {
    pub fn new(columns: &[&[f64]], num_basis: usize) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.len());
        let mut matrix = DMatrix::zeros(n, columns.len() * num_basis);
        let mut bases = Vec::with_capacity(columns.len());
        let mut row = vec![0.0; num_basis];
        for (g, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Input("predictor columns differ in length".into()));
            }
            let b = SplineBasis::fit(col, num_basis)?;
            for (r, &x) in col.iter().enumerate() {
                b.eval_into(x, &mut row);
                for (k, v) in row.iter().enumerate() {
                    matrix[(r, g * num_basis + k)] = *v;
                }
            }
            bases.push(b);
        }
        Ok(Self {
            bases,
            matrix,
            num_basis,
        })
    }

    pub fn group_columns(&self, g: usize) -> Range<usize> {
        g * self.num_basis..(g + 1) * self.num_basis
    }
}

/// Deterministic fold id per row.
pub(crate) fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut fold = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        fold[i] = pos % k;
    }
    fold
}

/// Per-fold sufficient statistics for a design.
pub(crate) struct FoldStats {
    pub total: XMoments,
    pub folds: Vec<XMoments>,
    pub fold_rows: Vec<Vec<usize>>,
}

impl FoldStats {
    pub fn new(matrix: &DMatrix<f64>, num_folds: usize, seed: u64) -> Self {
        let n = matrix.nrows();
        let fold_of = fold_assignment(n, num_folds, seed);
        let mut fold_rows = vec![Vec::new(); num_folds];
        for (i, &f) in fold_of.iter().enumerate() {
            fold_rows[f].push(i);
        }
        let folds: Vec<XMoments> = fold_rows
            .iter()
            .map(|rows| XMoments::of(&matrix.select_rows(rows)))
            .collect();
        let mut total = folds[0].clone();
        for f in &folds[1..] {
            total.n += f.n;
            total.sum_x += &f.sum_x;
            total.xtx += &f.xtx;
        }
        Self {
            total,
            folds,
            fold_rows,
        }
    }

    pub fn response(&self, matrix: &DMatrix<f64>, y: &[f64]) -> (YMoments, Vec<YMoments>) {
        let folds: Vec<YMoments> = self
            .fold_rows
            .iter()
            .map(|rows| {
                let mut masked = DVector::zeros(y.len());
                for &i in rows {
                    masked[i] = y[i];
                }
                YMoments {
                    xty: matrix.tr_mul(&masked),
                    sum_y: rows.iter().map(|&i| y[i]).sum(),
                    sum_yy: rows.iter().map(|&i| y[i] * y[i]).sum(),
                }
            })
            .collect();
        let mut total = folds[0].clone();
        for f in &folds[1..] {
            total.xty += &f.xty;
            total.sum_y += f.sum_y;
            total.sum_yy += f.sum_yy;
        }
        (total, folds)
    }
}

/// Log-spaced grid from `lambda_max` down to `ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, count: usize, ratio: f64) -> Vec<f64> {
    if count == 1 {
        return vec![lambda_max];
    }
    let (hi, lo) = (lambda_max.ln(), (lambda_max * ratio).ln());
    (0..count)
        .map(|i| {
            if i == 0 {
                lambda_max
            } else if i == count - 1 {
                lambda_max * ratio
            } else {
                (hi + (lo - hi) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// K-fold cross-validation over the grid with the one-standard-error rule.
/// `cols` selects raw design columns and `groups` their grouping in that
/// selection.
pub(crate) fn cross_validate(
    stats: &FoldStats,
    total_y: &YMoments,
    fold_y: &[YMoments],
    cols: &[usize],
    groups: &[Range<usize>],
    cfg: &SpamConfig,
) -> Result<CvPath> {
    let xt = stats.total.select(cols);
    let yt = total_y.select(cols);
    let full = Problem::new(&xt, &yt, groups)?;
    let lmax = full.lambda_max();
    let k = stats.folds.len();
    if lmax <= 0.0 {
        // Response orthogonal to every predictor: the sparsest model wins.
        return Ok(CvPath {
            lambdas: vec![0.0],
            mean_mse: vec![full.yy],
            se_mse: vec![0.0],
            best_index: 0,
            selected_index: 0,
        });
    }
    let lambdas = lambda_grid(lmax, cfg.num_lambdas, cfg.lambda_min_ratio);
    let mut mse = vec![vec![0.0; k]; lambdas.len()];
    for f in 0..k {
        let xv = stats.folds[f].select(cols);
        let yv = fold_y[f].select(cols);
        let xtr = xt.minus(&xv);
        let ytr = yt.minus(&yv);
        let prob = Problem::new(&xtr, &ytr, groups)?;
        let mut beta = DVector::zeros(prob.dim());
        for (li, &lam) in lambdas.iter().enumerate() {
            prob.solve(lam, &mut beta, cfg.tol, cfg.max_sweeps);
            let (coefs, b0) = prob.raw_coefficients(&beta);
            let stacked = DVector::from_iterator(cols.len(), coefs.into_iter().flatten());
            mse[li][f] = heldout_mse(&xv, &yv, &stacked, b0);
        }
    }
    let mean_mse: Vec<f64> = mse.iter().map(|m| m.iter().sum::<f64>() / k as f64).collect();
    let se_mse: Vec<f64> = mse
        .iter()
        .zip(&mean_mse)
        .map(|(m, mu)| {
            if k < 2 {
                return 0.0;
            }
            let var = m.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        })
        .collect();
    let best_index = (0..lambdas.len())
        .min_by(|&a, &b| mean_mse[a].total_cmp(&mean_mse[b]))
        .unwrap();
    let bound = mean_mse[best_index] + se_mse[best_index];
    // Grid is decreasing, so the first index within the bound has the largest lambda.
    let selected_index = (0..lambdas.len()).find(|&i| mean_mse[i] <= bound).unwrap();
    Ok(CvPath {
        lambdas,
        mean_mse,
        se_mse,
        best_index,
        selected_index,
    })
}

/// Fits the additive model at `lambda`, warm-starting along `path` (a
/// decreasing sequence ending at `lambda`) when given.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fit_on_stats(
    target: &str,
    names: &[NodeId],
    bases: &[SplineBasis],
    xm: &XMoments,
    ym: &YMoments,
    groups: &[Range<usize>],
    path: &[f64],
    lambda: f64,
    cfg: &SpamConfig,
) -> Result<SplineAdditiveModel> {
    let prob = Problem::new(xm, ym, groups)?;
    let mut beta = DVector::zeros(prob.dim());
    let mut sweeps = 0;
    for &l in path.iter().filter(|&&l| l > lambda) {
        sweeps += prob.solve(l, &mut beta, cfg.tol, cfg.max_sweeps).0;
    }
    let (s, converged) = prob.solve(lambda, &mut beta, cfg.tol, cfg.max_sweeps);
    sweeps += s;
    let (coefs, intercept) = prob.raw_coefficients(&beta);
    let groups = names
        .iter()
        .zip(bases)
        .zip(coefs)
        .map(|((name, basis), coef)| {
            (
                name.clone(),
                SplineGroup {
                    basis: basis.clone(),
                    coef,
                },
            )
        })
        .collect();
    Ok(SplineAdditiveModel {
        target: target.to_string(),
        groups,
        intercept,
        lambda,
        converged,
        sweeps,
    })
}

fn check_inputs(y: &[f64], predictors: &[(&str, &[f64])], min_rows: usize) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("response contains non-finite values".into()));
    }
    for (name, col) in predictors {
        if col.len() != y.len() {
            return Err(Error::Input(format!(
                "predictor `{name}` has {} rows, response has {}",
                col.len(),
                y.len()
            )));
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("predictor `{name}` contains non-finite values")));
        }
    }
    if y.len() < min_rows {
        return Err(Error::Input(format!(
            "{} rows, at least {min_rows} required",
            y.len()
        )));
    }
    Ok(())
}

/// Minimizes mean squared residual plus `lambda` times the sum of the
/// component norms, by block coordinate descent. A run that hits
/// `max_sweeps` is returned with `converged == false`.
pub fn fit_group_sparse(
    target: &str,
    y: &[f64],
    predictors: &[(&str, &[f64])],
    cfg: &SpamConfig,
    lambda: f64,
) -> Result<SplineAdditiveModel> {
    if !(lambda >= 0.0) {
        return Err(Error::Input(format!("lambda must be >= 0, got {lambda}")));
    }
    check_inputs(y, predictors, 10 * cfg.num_basis)?;
    let cols: Vec<&[f64]> = predictors.iter().map(|(_, c)| *c).collect();
    let design = Design::new(&cols, cfg.num_basis)?;
    let xm = XMoments::of(&design.matrix);
    let ym = YMoments::of(&design.matrix, y);
    let groups: Vec<Range<usize>> = (0..predictors.len()).map(|g| design.group_columns(g)).collect();
    let names: Vec<NodeId> = predictors.iter().map(|(n, _)| n.to_string()).collect();
    fit_on_stats(target, &names, &design.bases, &xm, &ym, &groups, &[], lambda, cfg)
}

/// Chooses the penalty by K-fold cross-validated MSE and the 1-SE rule.
pub fn cv_select_lambda(y: &[f64], predictors: &[(&str, &[f64])], cfg: &SpamConfig) -> Result<CvPath> {
    check_inputs(y, predictors, (cfg.num_folds * 20).max(10 * cfg.num_basis))?;
    if cfg.num_folds < 2 {
        return Err(Error::Input("cross-validation needs at least 2 folds".into()));
    }
    let cols: Vec<&[f64]> = predictors.iter().map(|(_, c)| *c).collect();
    let design = Design::new(&cols, cfg.num_basis)?;
    let stats = FoldStats::new(&design.matrix, cfg.num_folds, cfg.seed);
    let (ty, fy) = stats.response(&design.matrix, y);
    let all: Vec<usize> = (0..design.matrix.ncols()).collect();
    let groups: Vec<Range<usize>> = (0..predictors.len()).map(|g| design.group_columns(g)).collect();
    cross_validate(&stats, &ty, &fy, &all, &groups, cfg)
}

/// Cross-validates the penalty, then refits on all rows at the selected value.
pub fn fit_cv(
    target: &str,
    y: &[f64],
    predictors: &[(&str, &[f64])],
    cfg: &SpamConfig,
) -> Result<(SplineAdditiveModel, CvPath)> {
    check_inputs(y, predictors, (cfg.num_folds * 20).max(10 * cfg.num_basis))?;
    let cols: Vec<&[f64]> = predictors.iter().map(|(_, c)| *c).collect();
    let design = Design::new(&cols, cfg.num_basis)?;
    let stats = FoldStats::new(&design.matrix, cfg.num_folds, cfg.seed);
    let (ty, fy) = stats.response(&design.matrix, y);
    let all: Vec<usize> = (0..design.matrix.ncols()).collect();
    let groups: Vec<Range<usize>> = (0..predictors.len()).map(|g| design.group_columns(g)).collect();
    let path = cross_validate(&stats, &ty, &fy, &all, &groups, cfg)?;
    let names: Vec<NodeId> = predictors.iter().map(|(n, _)| n.to_string()).collect();
    let model = fit_on_stats(
        target,
        &names,
        &design.bases,
        &stats.total,
        &ty,
        &groups,
        &path.lambdas,
        path.selected_lambda(),
        cfg,
    )?;
    Ok((model, path))
}
