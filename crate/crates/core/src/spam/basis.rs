//! Clamped cubic B-spline basis with interior knots at empirical quantiles.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{mean_sd, quantile_sorted};
use crate::error::{Error, Result};

pub const DEGREE: usize = 3;

/// B-spline basis fitted to one predictor column.
///
/// The column is standardized with its training mean/sd; the basis lives on
/// `[lo, hi]`, the standardized training range, and values outside are
/// clamped to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    num_basis: usize,
    degree: usize,
    mean: f64,
    scale: f64,
    /// Full clamped knot vector, length `num_basis + degree + 1`.
    knots: Vec<f64>,
}

impl SplineBasis {
    /// Fits a basis with `num_basis` functions to `column`.
    pub fn fit(column: &[f64], num_basis: usize) -> Result<Self> {
        Self::fit_with_degree(column, num_basis, DEGREE)
    }

    pub fn fit_with_degree(column: &[f64], num_basis: usize, degree: usize) -> Result<Self> {
        if num_basis < degree + 1 {
            return Err(Error::Input(format!(
                "num_basis {num_basis} must be at least degree + 1 = {}",
                degree + 1
            )));
        }
        if column.is_empty() || column.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("spline column must be non-empty and finite".into()));
        }
        let (mean, sd) = mean_sd(column);
        if sd <= 0.0 || !sd.is_finite() {
            return Err(Error::Degenerate("constant column has no spline basis".into()));
        }
        let mut z: Vec<f64> = column.iter().map(|v| (v - mean) / sd).collect();
        z.sort_by(f64::total_cmp);
        let (lo, hi) = (z[0], z[z.len() - 1]);
        if lo >= hi {
            return Err(Error::Degenerate("constant column has no spline basis".into()));
        }
        let interior = num_basis - degree - 1;
        let mut knots = Vec::with_capacity(num_basis + degree + 1);
        knots.extend(std::iter::repeat_n(lo, degree + 1));
        for k in 1..=interior {
            let q = quantile_sorted(&z, k as f64 / (interior + 1) as f64);
            knots.push(q.clamp(lo, hi));
        }
        knots.extend(std::iter::repeat_n(hi, degree + 1));
        Ok(Self {
            num_basis,
            degree,
            mean,
            scale: sd,
            knots,
        })
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Interior knots on the standardized scale.
    pub fn interior_knots(&self) -> &[f64] {
        &self.knots[self.degree + 1..self.num_basis]
    }

    /// Interior knots on the original data scale.
    pub fn interior_knots_raw(&self) -> Vec<f64> {
        self.interior_knots()
            .iter()
            .map(|k| k * self.scale + self.mean)
            .collect()
    }

    /// Training range on the original data scale.
    pub fn boundary(&self) -> (f64, f64) {
        let lo = self.knots[0] * self.scale + self.mean;
        let hi = self.knots[self.knots.len() - 1] * self.scale + self.mean;
        (lo, hi)
    }

    /// Writes the `num_basis` basis values at raw value `x` into `out`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.num_basis);
        let p = self.degree;
        let lo = self.knots[0];
        let hi = self.knots[self.knots.len() - 1];
        let u = ((x - self.mean) / self.scale).clamp(lo, hi);
        let span = self.find_span(u);

        let mut n = [0.0f64; 8];
        let mut left = [0.0f64; 8];
        let mut right = [0.0f64; 8];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = u - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        out.fill(0.0);
        for (r, v) in n.iter().take(p + 1).enumerate() {
            out[span - p + r] = *v;
        }
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_basis];
        self.eval_into(x, &mut out);
        out
    }

    /// Knot span index `i` with `knots[i] <= u < knots[i + 1]`, using the last
    /// non-empty span at the right boundary.
    fn find_span(&self, u: f64) -> usize {
        let p = self.degree;
        let last = self.num_basis - 1;
        let mut i = last;
        while i > p && (self.knots[i] > u || self.knots[i] >= self.knots[i + 1]) {
            i -= 1;
        }
        i
    }

    /// Design block (rows x num_basis) for a column.
    pub fn design(&self, column: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(column.len(), self.num_basis);
        let mut row = vec![0.0; self.num_basis];
        for (r, &x) in column.iter().enumerate() {
            self.eval_into(x, &mut row);
            for (c, v) in row.iter().enumerate() {
                m[(r, c)] = *v;
            }
        }
        m
    }
}

/// Spline design block of `column` under `basis`.
pub fn spline_design(column: &[f64], basis: &SplineBasis) -> Result<DMatrix<f64>> {
    if column.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("spline design column contains non-finite values".into()));
    }
    Ok(basis.design(column))
}
