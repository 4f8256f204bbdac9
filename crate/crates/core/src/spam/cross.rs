//! Learning edges between processes with sparse additive regressions.

use std::collections::BTreeSet;
use std::ops::Range;

use rayon::prelude::*;

use super::group_lasso::{cross_validate, fit_on_stats, Design, FoldStats, SpamConfig};
use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::graph::{NodeId, PriorKnowledge};

/// Which predictors enter each regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictorMode {
    /// Earlier processes, plus the within-process parents of targets without
    /// a known mechanism.
    #[default]
    WithParents,
    /// Earlier processes only. Kept for diagnostics: omitting the parents
    /// lets indirect influences show up as spurious edges.
    Naive,
}

/// Fit summary for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetFit {
    pub target: NodeId,
    pub predictors: Vec<NodeId>,
    pub active: Vec<NodeId>,
    pub lambda: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEdges {
    /// Sorted cross-process edges `(source, target)`.
    pub edges: Vec<(NodeId, NodeId)>,
    pub fits: Vec<TargetFit>,
}

/// Learns edges across processes for every node of processes `2..=K`.
pub fn learn_cross_process_edges(data: &DatasetTable, prior: &PriorKnowledge, cfg: &SpamConfig) -> Result<CrossEdges> {
    learn_cross_process_edges_with(data, prior, cfg, PredictorMode::WithParents)
}

pub fn learn_cross_process_edges_with(
    data: &DatasetTable,
    prior: &PriorKnowledge,
    cfg: &SpamConfig,
    mode: PredictorMode,
) -> Result<CrossEdges> {
    let within = prior.within();
    let dag = within.dag();
    let missing = data.missing(dag.nodes());
    if !missing.is_empty() {
        return Err(Error::Input(format!("data lacks node columns: {}", missing.join(", "))));
    }
    for m in prior.mechanisms() {
        if !data.has_column(&m.prediction_column) {
            return Err(Error::Input(format!(
                "data lacks mechanism prediction column `{}` for `{}`",
                m.prediction_column, m.target
            )));
        }
    }
    if !data.all_finite() {
        return Err(Error::Input("data contains non-finite values".into()));
    }
    let n = data.n_rows();
    let min_rows = (cfg.num_folds * 20).max(10 * cfg.num_basis);
    if n < min_rows {
        return Err(Error::Input(format!("{n} rows, at least {min_rows} required")));
    }
    if cfg.num_folds < 2 {
        return Err(Error::Input("cross-validation needs at least 2 folds".into()));
    }

    // One shared basis expansion of every non-constant node.
    let mut usable = Vec::new();
    let mut cols = Vec::new();
    for (i, name) in dag.nodes().iter().enumerate() {
        let c = data.column(name)?;
        if c.iter().any(|&v| v != c[0]) {
            usable.push(i);
            cols.push(c);
        }
    }
    let design = Design::new(&cols, cfg.num_basis)?;
    let stats = FoldStats::new(&design.matrix, cfg.num_folds, cfg.seed);
    let mut slot = vec![None; dag.n_nodes()];
    for (g, &i) in usable.iter().enumerate() {
        slot[i] = Some(g);
    }

    let mut jobs = Vec::new();
    for t in 2..=prior.n_processes() {
        let earlier: Vec<usize> = match prior.process_parents(t) {
            Some(ps) => {
                let ps: BTreeSet<usize> = ps.into_iter().collect();
                (0..dag.n_nodes()).filter(|&i| ps.contains(&within.process_of(i))).collect()
            }
            None => (0..dag.n_nodes()).filter(|&i| within.process_of(i) < t).collect(),
        };
        for name in prior.process_graph(t)?.causal_order() {
            let k = dag.index_of(&name)?;
            let mut preds: BTreeSet<usize> = earlier.iter().copied().collect();
            if mode == PredictorMode::WithParents && prior.mechanism(&name).is_none() {
                preds.extend(dag.parents(k).iter().copied());
            }
            jobs.push((k, preds));
        }
    }

    let fits: Vec<TargetFit> = jobs
        .par_iter()
        .map(|(k, preds)| {
            let name = dag.node(*k);
            fit_target(data, prior, &design, &stats, &slot, name, preds, dag.nodes(), cfg)
                .map_err(|e| e.for_target(name))
        })
        .collect::<Result<_>>()?;

    let mut edges = BTreeSet::new();
    for f in &fits {
        let k = dag.index_of(&f.target)?;
        for a in &f.active {
            let l = dag.index_of(a)?;
            if within.process_of(l) < within.process_of(k) {
                edges.insert((a.clone(), f.target.clone()));
            }
        }
    }
    Ok(CrossEdges {
        edges: edges.into_iter().collect(),
        fits,
    })
}

#[allow(clippy::too_many_arguments)]
fn fit_target(
    data: &DatasetTable,
    prior: &PriorKnowledge,
    design: &Design,
    stats: &FoldStats,
    slot: &[Option<usize>],
    name: &str,
    preds: &BTreeSet<usize>,
    nodes: &[NodeId],
    cfg: &SpamConfig,
) -> Result<TargetFit> {
    let mut y = data.column(name)?.to_vec();
    if let Some(m) = prior.mechanism(name) {
        let pred = data.column(&m.prediction_column)?;
        for (v, p) in y.iter_mut().zip(pred) {
            *v -= p;
        }
    }
    let groups_used: Vec<usize> = preds.iter().filter(|&&i| slot[i].is_some()).copied().collect();
    let names: Vec<NodeId> = groups_used.iter().map(|&i| nodes[i].clone()).collect();
    if groups_used.is_empty() {
        return Ok(TargetFit {
            target: name.to_string(),
            predictors: names,
            active: Vec::new(),
            lambda: 0.0,
            converged: true,
        });
    }
    let mut cols = Vec::new();
    let mut ranges: Vec<Range<usize>> = Vec::new();
    let mut bases = Vec::new();
    for &i in &groups_used {
        let g = slot[i].unwrap();
        let r = design.group_columns(g);
        ranges.push(cols.len()..cols.len() + r.len());
        cols.extend(r);
        bases.push(design.bases[g].clone());
    }
    let (ty, fy) = stats.response(&design.matrix, &y);
    let path = cross_validate(stats, &ty, &fy, &cols, &ranges, cfg)?;
    let model = fit_on_stats(
        name,
        &names,
        &bases,
        &stats.total.select(&cols),
        &ty.select(&cols),
        &ranges,
        &path.lambdas,
        path.selected_lambda(),
        cfg,
    )?;
    Ok(TargetFit {
        target: name.to_string(),
        predictors: names,
        active: model.active_set(),
        lambda: model.lambda,
        converged: model.converged,
    })
}
