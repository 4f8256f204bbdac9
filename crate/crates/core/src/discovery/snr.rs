use crate::data::{variance, DatasetTable};
use crate::error::{Error, Result};
use crate::graph::Dag;

use super::lasso::bic_support;

/// Orders variables by increasing marginal variance (ties by column index)
/// and lasso-regresses each on its predecessors.
pub fn sortnregress(data: &DatasetTable) -> Result<Dag> {
    if data.n_cols() == 0 {
        return Err(Error::Input("sortnregress needs at least one column".into()));
    }
    let cols = data.columns();
    let var: Vec<f64> = cols.iter().map(|c| variance(c)).collect();
    let mut order: Vec<usize> = (0..cols.len()).collect();
    order.sort_by(|&a, &b| var[a].total_cmp(&var[b]).then(a.cmp(&b)));
    Dag::new(data.names().to_vec(), regress_along(cols, &order))
}

/// Edges from sparse regressions of each variable on its predecessors in
/// `order`.
pub(crate) fn regress_along(cols: &[Vec<f64>], order: &[usize]) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for (pos, &t) in order.iter().enumerate() {
        let preds = &order[..pos];
        let xs: Vec<&[f64]> = preds.iter().map(|&k| cols[k].as_slice()).collect();
        for k in bic_support(&cols[t], &xs) {
            edges.push((preds[k], t));
        }
    }
    edges
}
