//! Structural scores of a learned graph against the ground truth, and
//! varsortability.

use serde::{Deserialize, Serialize};

use crate::data::{variance, DatasetTable};
use crate::error::{Error, Result};
use crate::graph::Dag;

const VAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralScore {
    pub shd: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_edges: usize,
    pub learned_edges: usize,
    /// Set when a ratio had a zero denominator and was defined as 0.
    pub undefined: bool,
}

fn check_nodes(truth: &Dag, learned: &Dag) -> Result<()> {
    let mut a = truth.nodes().to_vec();
    let mut b = learned.nodes().to_vec();
    a.sort();
    b.sort();
    if a != b {
        return Err(Error::Input("graphs to compare have different node sets".into()));
    }
    Ok(())
}

/// Structural Hamming distance: one per node pair whose adjacency differs,
/// one per reversed edge.
pub fn shd(truth: &Dag, learned: &Dag) -> Result<usize> {
    check_nodes(truth, learned)?;
    let p = truth.n_nodes();
    let mut d = 0;
    for a in 0..p {
        let an = truth.node(a);
        let la = learned.index_of(an)?;
        for b in a + 1..p {
            let lb = learned.index_of(truth.node(b))?;
            let t = (truth.has_edge(a, b), truth.has_edge(b, a));
            let l = (learned.has_edge(la, lb), learned.has_edge(lb, la));
            if t != l {
                d += 1;
            }
        }
    }
    Ok(d)
}

/// Precision, recall and F1 over directed edges, plus SHD.
pub fn precision_recall_f1(truth: &Dag, learned: &Dag) -> Result<StructuralScore> {
    check_nodes(truth, learned)?;
    let mut tp = 0;
    for (a, b) in learned.named_edges() {
        let (ta, tb) = (truth.index_of(&a)?, truth.index_of(&b)?);
        if truth.has_edge(ta, tb) {
            tp += 1;
        }
    }
    let (nt, nl) = (truth.n_edges(), learned.n_edges());
    let mut undefined = false;
    let mut ratio = |num: usize, den: usize| {
        if den == 0 {
            undefined = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, nl);
    let recall = ratio(tp, nt);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(StructuralScore {
        shd: shd(truth, learned)?,
        precision,
        recall,
        f1,
        true_edges: nt,
        learned_edges: nl,
        undefined,
    })
}

/// Fraction of directed paths (counted once per ordered pair and length)
/// that run from lower to higher marginal variance; ties count one half.
pub fn varsortability(data: &DatasetTable, truth: &Dag) -> Result<f64> {
    let p = truth.n_nodes();
    let mut var = Vec::with_capacity(p);
    for name in truth.nodes() {
        let v = variance(data.column(name)?);
        if !(v > 0.0) {
            return Err(Error::Degenerate(format!("column `{name}` has zero variance")));
        }
        var.push(v);
    }
    let e: Vec<Vec<bool>> = (0..p).map(|a| (0..p).map(|b| truth.has_edge(a, b)).collect()).collect();
    let mut ek = e.clone();
    let (mut paths, mut sorted) = (0.0, 0.0);
    for _ in 1..p.max(1) {
        for a in 0..p {
            for b in 0..p {
                if ek[a][b] {
                    paths += 1.0;
                    let diff = var[b] - var[a];
                    if diff > VAR_TOL {
                        sorted += 1.0;
                    } else if diff.abs() <= VAR_TOL {
                        sorted += 0.5;
                    }
                }
            }
        }
        let mut next = vec![vec![false; p]; p];
        for a in 0..p {
            for m in 0..p {
                if ek[a][m] {
                    for b in 0..p {
                        next[a][b] |= e[m][b];
                    }
                }
            }
        }
        ek = next;
    }
    if paths == 0.0 {
        return Err(Error::Input("graph has no directed paths".into()));
    }
    Ok(sorted / paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(p: usize, edges: &[(usize, usize)]) -> Dag {
        Dag::new((0..p).map(|i| format!("x{i}")).collect(), edges.iter().copied()).unwrap()
    }

    #[test]
    fn shd_examples() {
        assert_eq!(shd(&dag(2, &[(0, 1)]), &dag(2, &[(1, 0)])).unwrap(), 1);
        assert_eq!(shd(&dag(4, &[(0, 1), (1, 2), (2, 3)]), &dag(4, &[])).unwrap(), 3);
        assert!(shd(&dag(2, &[]), &dag(3, &[])).is_err());
    }

    #[test]
    fn score_examples() {
        let truth = dag(3, &[(0, 1), (1, 2)]);
        let s = precision_recall_f1(&truth, &dag(3, &[(0, 1), (2, 1), (0, 2)])).unwrap();
        assert!((s.precision - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.recall - 0.5).abs() < 1e-15);
        assert!((s.f1 - 0.4).abs() < 1e-15);
        let s = precision_recall_f1(&truth, &dag(3, &[(1, 0), (2, 1)])).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let s = precision_recall_f1(&truth, &dag(3, &[])).unwrap();
        assert!(s.undefined && s.precision == 0.0);
    }

    fn table(vars: &[f64]) -> DatasetTable {
        // two-point columns with variance v: values +-sqrt(v)
        let cols = vars.iter().map(|v| vec![-v.sqrt(), v.sqrt()]).collect();
        DatasetTable::new((0..vars.len()).map(|i| format!("x{i}")).collect(), cols).unwrap()
    }

    #[test]
    fn varsortability_examples() {
        let chain = dag(3, &[(0, 1), (1, 2)]);
        assert_eq!(varsortability(&table(&[1.0, 2.0, 3.0]), &chain).unwrap(), 1.0);
        assert_eq!(varsortability(&table(&[3.0, 2.0, 1.0]), &chain).unwrap(), 0.0);
        assert_eq!(varsortability(&table(&[2.0, 2.0, 2.0]), &chain).unwrap(), 0.5);
        assert!(varsortability(&table(&[0.0, 2.0, 2.0]), &chain).is_err());
        assert!(varsortability(&table(&[1.0, 2.0, 2.0]), &dag(3, &[])).is_err());
        // paths 0->1, 1->2 (length 1) and 0->2 (length 2): 2 of 3 sorted
        assert!((varsortability(&table(&[1.0, 3.0, 2.0]), &chain).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }
}
