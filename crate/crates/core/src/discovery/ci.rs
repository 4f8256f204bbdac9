//! Conditional independence tests.

use nalgebra::DMatrix;
use statrs::function::erf::erfc;

use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::graph::{dsep::d_separated_idx, Dag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub independent: bool,
}

/// Decides whether variables `i` and `j` are independent given `s`.
pub trait CiTest: Sync {
    fn n_vars(&self) -> usize;
    fn independent(&self, i: usize, j: usize, s: &[usize]) -> Result<bool>;
}

/// Fisher-z test on partial correlations, from a precomputed correlation
/// matrix.
#[derive(Debug, Clone)]
pub struct FisherZ {
    corr: DMatrix<f64>,
    n: usize,
    alpha: f64,
}

impl FisherZ {
    pub fn new(data: &DatasetTable, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Input(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let n = data.n_rows();
        let p = data.n_cols();
        let mut z = Vec::with_capacity(p);
        for (name, c) in data.names().iter().zip(data.columns()) {
            let m = c.iter().sum::<f64>() / n as f64;
            let ss = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>().sqrt();
            if !(ss > 0.0) {
                return Err(Error::Degenerate(format!("column `{name}` is constant")));
            }
            z.push(c.iter().map(|v| (v - m) / ss).collect::<Vec<f64>>());
        }
        let corr = DMatrix::from_fn(p, p, |a, b| {
            if a == b {
                1.0
            } else {
                z[a].iter().zip(&z[b]).map(|(x, y)| x * y).sum()
            }
        });
        Ok(Self { corr, n, alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn test(&self, i: usize, j: usize, s: &[usize]) -> Result<CiTestResult> {
        if i == j || s.contains(&i) || s.contains(&j) {
            return Err(Error::Input("CI test needs distinct i, j outside the conditioning set".into()));
        }
        let k = s.len();
        if self.n <= k + 3 {
            return Err(Error::Input(format!(
                "{} rows are too few to condition on {k} variables",
                self.n
            )));
        }
        let r = partial_correlation(&self.corr, i, j, s)?;
        Ok(fisher_z_from_r(r, self.n, k, self.alpha))
    }
}

impl CiTest for FisherZ {
    fn n_vars(&self) -> usize {
        self.corr.nrows()
    }

    fn independent(&self, i: usize, j: usize, s: &[usize]) -> Result<bool> {
        Ok(self.test(i, j, s)?.independent)
    }
}

fn partial_correlation(corr: &DMatrix<f64>, i: usize, j: usize, s: &[usize]) -> Result<f64> {
    if s.is_empty() {
        return Ok(corr[(i, j)]);
    }
    let mut idx = vec![i, j];
    idx.extend_from_slice(s);
    let sub = corr.select_rows(&idx).select_columns(&idx);
    let inv = match sub.clone().try_inverse() {
        Some(m) if m.iter().all(|v| v.is_finite()) => m,
        _ => {
            let ridge = sub + DMatrix::identity(idx.len(), idx.len()) * 1e-10;
            ridge
                .try_inverse()
                .filter(|m| m.iter().all(|v| v.is_finite()))
                .ok_or_else(|| Error::Numeric("singular correlation submatrix".into()))?
        }
    };
    let den = (inv[(0, 0)] * inv[(1, 1)]).sqrt();
    if !(den > 0.0) {
        return Err(Error::Numeric("degenerate partial correlation".into()));
    }
    Ok(-inv[(0, 1)] / den)
}

/// Statistic sqrt(n - |s| - 3) |atanh r| and its two-sided normal p-value.
pub fn fisher_z_from_r(r: f64, n: usize, k: usize, alpha: f64) -> CiTestResult {
    let r = r.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
    let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln();
    let statistic = ((n - k - 3) as f64).sqrt() * z.abs();
    let p_value = erfc(statistic / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    CiTestResult {
        statistic,
        p_value,
        alpha,
        independent: p_value > alpha,
    }
}

/// Fisher-z test of `i` and `j` given `s`, by column name.
pub fn fisher_z_test(data: &DatasetTable, i: &str, j: &str, s: &[&str], alpha: f64) -> Result<CiTestResult> {
    let names: Vec<String> = std::iter::once(i)
        .chain(std::iter::once(j))
        .chain(s.iter().copied())
        .map(str::to_string)
        .collect();
    let sub = data.select(&names)?;
    let cond: Vec<usize> = (2..names.len()).collect();
    FisherZ::new(&sub, alpha)?.test(0, 1, &cond)
}

/// Exact answers from d-separation in a known DAG.
#[derive(Debug, Clone)]
pub struct DSepOracle {
    dag: Dag,
}

impl DSepOracle {
    pub fn new(dag: Dag) -> Self {
        Self { dag }
    }
}

impl CiTest for DSepOracle {
    fn n_vars(&self) -> usize {
        self.dag.n_nodes()
    }

    fn independent(&self, i: usize, j: usize, s: &[usize]) -> Result<bool> {
        Ok(d_separated_idx(&self.dag, &[i], &[j], s))
    }
}
