//! Semisynthetic generator: per-node conditionals fitted along a DAG and
//! ancestral sampling from them.

mod container;
mod fidelity;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{mean_sd, quantile_sorted, DatasetTable};
use crate::drf::{fit_drf, DistributionalForest, DrfConfig, Tree};
use crate::error::{Error, Result};
use crate::graph::{LayeredDag, NodeId};

pub use container::{load_model, read_model, save_model, write_model, FORMAT_VERSION};
pub use fidelity::{fidelity_report, ks_statistic, FidelityEntry, FidelityReport, FidelitySummary};

/// Jitter draws are truncated at this many bandwidths.
const JITTER_CLIP: f64 = 5.0;

/// Resampling of a source column with Gaussian jitter.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothBootstrapSpec {
    values: Vec<f64>,
    bandwidth: f64,
}

impl SmoothBootstrapSpec {
    /// Bandwidth by Silverman's rule, 0.9 min(sd, IQR / 1.34) n^(-1/5). When
    /// one of the two spread measures is zero the other is used; a constant
    /// column gets bandwidth zero.
    pub fn fit(column: &[f64]) -> Result<Self> {
        if column.is_empty() {
            return Err(Error::Input("cannot bootstrap an empty column".into()));
        }
        if column.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("source column contains non-finite values".into()));
        }
        let n = column.len();
        let sd = if n > 1 {
            let (_, sd) = mean_sd(column);
            sd * (n as f64 / (n as f64 - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = column.to_vec();
        sorted.sort_by(f64::total_cmp);
        let iqr = (quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)) / 1.34;
        let spread = match (sd > 0.0, iqr > 0.0) {
            (true, true) => sd.min(iqr),
            (true, false) => sd,
            (false, true) => iqr,
            (false, false) => 0.0,
        };
        Ok(Self {
            values: column.to_vec(),
            bandwidth: 0.9 * spread * (n as f64).powf(-0.2),
        })
    }

    pub fn new(values: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if values.is_empty() || !(bandwidth >= 0.0 && bandwidth.is_finite()) {
            return Err(Error::Input("bootstrap needs values and a bandwidth >= 0".into()));
        }
        Ok(Self { values, bandwidth })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Uniform training value plus Gaussian jitter truncated at five
    /// bandwidths.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = self.values[rng.random_range(0..self.values.len())];
        if self.bandwidth == 0.0 {
            return v;
        }
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z.abs() <= JITTER_CLIP {
                return v + self.bandwidth * z;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub drf: DrfConfig,
    /// Master seed; each forest gets its own seed derived from it.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            drf: DrfConfig::default(),
            seed: 0,
        }
    }
}

/// Provenance of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub seed: u64,
    pub data_fingerprint: String,
    pub n_train: usize,
    pub config: PipelineConfig,
}

/// How a node is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeModel {
    Source(SmoothBootstrapSpec),
    Conditional(DistributionalForest),
}

/// Fitted generator: one model per node, applied along a causal order.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModel {
    dag: LayeredDag,
    order: Vec<NodeId>,
    nodes: BTreeMap<NodeId, NodeModel>,
    meta: FitMeta,
    /// Per position in `order`: node index and parent indices.
    plan: Vec<(usize, Vec<usize>)>,
}

impl PipelineModel {
    pub(crate) fn assemble(
        dag: LayeredDag,
        order: Vec<NodeId>,
        nodes: BTreeMap<NodeId, NodeModel>,
        meta: FitMeta,
    ) -> Result<Self> {
        let g = dag.dag();
        if order.len() != g.n_nodes() {
            return Err(Error::Format("causal order does not cover the graph".into()));
        }
        let mut pos = vec![usize::MAX; g.n_nodes()];
        for (k, name) in order.iter().enumerate() {
            let i = g.index_of(name)?;
            if pos[i] != usize::MAX {
                return Err(Error::Format(format!("node `{name}` repeated in causal order")));
            }
            pos[i] = k;
        }
        let mut plan = Vec::with_capacity(order.len());
        for name in &order {
            let i = g.index_of(name)?;
            let parents = g.parents(i).to_vec();
            if parents.iter().any(|&p| pos[p] > pos[i]) {
                return Err(Error::Format(format!("order places a parent of `{name}` after it")));
            }
            match nodes.get(name) {
                Some(NodeModel::Source(_)) if parents.is_empty() => {}
                Some(NodeModel::Conditional(f)) if !parents.is_empty() => {
                    let want: Vec<NodeId> = parents.iter().map(|&p| g.node(p).to_string()).collect();
                    if f.predictors() != want.as_slice() {
                        return Err(Error::Format(format!(
                            "forest for `{name}` uses predictors {:?}, graph parents are {want:?}",
                            f.predictors()
                        )));
                    }
                }
                _ => {
                    return Err(Error::Format(format!(
                        "node `{name}` lacks a model matching its parent set"
                    )))
                }
            }
            plan.push((i, parents));
        }
        if nodes.len() != order.len() {
            return Err(Error::Format("models given for nodes outside the graph".into()));
        }
        Ok(Self {
            dag,
            order,
            nodes,
            meta,
            plan,
        })
    }

    pub fn dag(&self) -> &LayeredDag {
        &self.dag
    }

    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    pub fn meta(&self) -> &FitMeta {
        &self.meta
    }

    pub fn node_model(&self, name: &str) -> Option<&NodeModel> {
        self.nodes.get(name)
    }

    pub fn sources(&self) -> impl Iterator<Item = (&NodeId, &SmoothBootstrapSpec)> {
        self.nodes.iter().filter_map(|(n, m)| match m {
            NodeModel::Source(s) => Some((n, s)),
            NodeModel::Conditional(_) => None,
        })
    }

    pub fn forests(&self) -> impl Iterator<Item = (&NodeId, &DistributionalForest)> {
        self.nodes.iter().filter_map(|(n, m)| match m {
            NodeModel::Conditional(f) => Some((n, f)),
            NodeModel::Source(_) => None,
        })
    }

    pub fn n_sources(&self) -> usize {
        self.sources().count()
    }

    pub fn n_forests(&self) -> usize {
        self.forests().count()
    }

    pub fn is_source(&self, name: &str) -> bool {
        matches!(self.nodes.get(name), Some(NodeModel::Source(_)))
    }
}

/// Seed for the forest of the node at graph position `i`.
fn node_seed(seed: u64, i: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64 + 1);
    rng.random()
}

/// Fits a smooth bootstrap for every source of `dag` and a forest of each
/// other node on its parents.
pub fn fit_pipeline(data: &DatasetTable, dag: &LayeredDag, config: &PipelineConfig) -> Result<PipelineModel> {
    let g = dag.dag();
    let missing = data.missing(g.nodes());
    if !missing.is_empty() {
        return Err(Error::Input(format!(
            "data lacks columns for graph nodes: {}",
            missing.join(", ")
        )));
    }
    config.drf.validate()?;
    let order = dag.causal_order();
    let mut nodes = BTreeMap::new();
    for name in &order {
        let i = g.index_of(name)?;
        let y = data.column(name)?;
        if g.parents(i).is_empty() {
            nodes.insert(name.clone(), NodeModel::Source(SmoothBootstrapSpec::fit(y)?));
            continue;
        }
        let parents = g.parent_names(i);
        let cols: Vec<(&str, &[f64])> = parents
            .iter()
            .map(|p| Ok((p.as_str(), data.column(p)?)))
            .collect::<Result<_>>()?;
        let forest = if y.iter().all(|&v| v == y[0]) {
            // A constant node: every draw returns the training value.
            let rows = (0..y.len() as u32).collect();
            DistributionalForest::from_trees(name.clone(), parents.clone(), y.to_vec(), vec![Tree::leaf(rows)])?
        } else {
            let cfg = DrfConfig {
                seed: node_seed(config.seed, i),
                ..config.drf.clone()
            };
            fit_drf(name, y, &cols, &cfg).map_err(|e| e.for_target(name))?
        };
        nodes.insert(name.clone(), NodeModel::Conditional(forest));
    }
    let meta = FitMeta {
        seed: config.seed,
        data_fingerprint: data.fingerprint(),
        n_train: data.n_rows(),
        config: config.clone(),
    };
    PipelineModel::assemble(dag.clone(), order, nodes, meta)
}

/// One independent pipeline per station, fitted on the station's nodes and
/// the station's subgraph of `dag`.
pub fn fit_cell_pipelines(
    data: &DatasetTable,
    dag: &LayeredDag,
    config: &PipelineConfig,
) -> Result<BTreeMap<usize, PipelineModel>> {
    let mut out = BTreeMap::new();
    for s in dag.stations() {
        let sub = dag.station_subgraph(s)?;
        out.insert(s, fit_pipeline(data, &sub, config)?);
    }
    Ok(out)
}

/// Draws `n` rows. Each row is generated completely, node by node along the
/// causal order, before the next row starts. Columns follow the graph's
/// node order.
pub fn sample<R: Rng + ?Sized>(model: &PipelineModel, n: usize, rng: &mut R) -> Result<DatasetTable> {
    if n == 0 {
        return Err(Error::Input("sample size must be at least 1".into()));
    }
    let g = model.dag.dag();
    let p = g.n_nodes();
    let mut columns = vec![Vec::with_capacity(n); p];
    let mut row = vec![0.0; p];
    let mut query = Vec::new();
    let models: Vec<&NodeModel> = model.plan.iter().map(|(i, _)| &model.nodes[g.node(*i)]).collect();
    for _ in 0..n {
        for ((i, parents), m) in model.plan.iter().zip(&models) {
            row[*i] = match m {
                NodeModel::Source(s) => s.draw(rng),
                NodeModel::Conditional(f) => {
                    query.clear();
                    query.extend(parents.iter().map(|&q| row[q]));
                    f.sample_unchecked(&query, rng)
                }
            };
        }
        for (c, v) in columns.iter_mut().zip(&row) {
            c.push(*v);
        }
    }
    DatasetTable::new(g.nodes().to_vec(), columns)
}
