use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sample, PipelineModel};
use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::graph::NodeId;

/// Two-sample Kolmogorov-Smirnov statistic: the largest gap between the two
/// empirical CDFs, found by walking both sorted samples.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("KS statistic needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Input("KS statistic on NaN values".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityEntry {
    pub node: NodeId,
    pub ks: f64,
    pub source: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelitySummary {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
}

/// Per-node KS statistics, sorted by decreasing KS, with a summary over the
/// non-source nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub n_synthetic: usize,
    pub entries: Vec<FidelityEntry>,
    pub non_source: Option<FidelitySummary>,
}

impl FidelityReport {
    pub fn from_tables(original: &DatasetTable, synthetic: &DatasetTable, model: &PipelineModel) -> Result<Self> {
        let mut entries = Vec::new();
        for node in model.dag().dag().nodes() {
            let ks = ks_statistic(original.column(node)?, synthetic.column(node)?)?;
            entries.push(FidelityEntry {
                node: node.clone(),
                ks,
                source: model.is_source(node),
            });
        }
        entries.sort_by(|x, y| y.ks.total_cmp(&x.ks).then_with(|| x.node.cmp(&y.node)));
        let ns: Vec<f64> = entries.iter().filter(|e| !e.source).map(|e| e.ks).collect();
        let non_source = (!ns.is_empty()).then(|| FidelitySummary {
            max: ns.iter().cloned().fold(f64::MIN, f64::max),
            min: ns.iter().cloned().fold(f64::MAX, f64::min),
            mean: ns.iter().sum::<f64>() / ns.len() as f64,
        });
        Ok(Self {
            n_synthetic: synthetic.n_rows(),
            entries,
            non_source,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Samples `n` rows from `model` and compares each node with the original
/// column.
pub fn fidelity_report<R: Rng + ?Sized>(
    original: &DatasetTable,
    model: &PipelineModel,
    n: usize,
    rng: &mut R,
) -> Result<FidelityReport> {
    let missing = original.missing(model.dag().dag().nodes());
    if !missing.is_empty() {
        return Err(Error::Input(format!(
            "original data lacks model nodes: {}",
            missing.join(", ")
        )));
    }
    let synthetic = sample(model, n, rng)?;
    FidelityReport::from_tables(original, &synthetic, model)
}
