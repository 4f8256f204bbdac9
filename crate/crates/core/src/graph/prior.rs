use std::collections::BTreeMap;

use super::{Dag, LayeredDag, NodeId};
use crate::error::{Error, Result};

/// A known functional relation for one node: its per-row prediction lives in
/// a precomputed column of the training table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechanismSpec {
    pub target: NodeId,
    pub inputs: Vec<NodeId>,
    pub prediction_column: String,
}

/// Expert knowledge: the within-process graphs, optional known mechanisms,
/// and optionally a graph over processes restricting which earlier processes
/// may influence a later one.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorKnowledge {
    within: LayeredDag,
    mechanisms: BTreeMap<NodeId, MechanismSpec>,
    process_graph: Option<Vec<(usize, usize)>>,
}

impl PriorKnowledge {
    /// `within` holds the union of the process graphs; every edge must stay
    /// inside one process.
    pub fn new(
        within: LayeredDag,
        mechanisms: Vec<MechanismSpec>,
        process_graph: Option<Vec<(usize, usize)>>,
    ) -> Result<Self> {
        let dag = within.dag();
        for (a, b) in dag.edges() {
            if within.process_of(a) != within.process_of(b) {
                return Err(Error::Input(format!(
                    "prior edge {} -> {} crosses processes {} and {}",
                    dag.node(a),
                    dag.node(b),
                    within.process_of(a),
                    within.process_of(b)
                )));
            }
        }
        let mut map = BTreeMap::new();
        for m in mechanisms {
            let t = dag.index_of(&m.target)?;
            for inp in &m.inputs {
                let i = dag.index_of(inp)?;
                if !dag.has_edge(i, t) {
                    return Err(Error::Input(format!(
                        "mechanism input `{inp}` is not a parent of `{}` in its process graph",
                        m.target
                    )));
                }
            }
            if map.insert(m.target.clone(), m).is_some() {
                return Err(Error::Input("two mechanisms declared for one target".into()));
            }
        }
        if let Some(pg) = &process_graph {
            let k = within.n_processes();
            for &(j, t) in pg {
                if j == 0 || t > k || j >= t {
                    return Err(Error::Input(format!(
                        "process-level edge {j} -> {t} must satisfy 1 <= {j} < {t} <= {k}"
                    )));
                }
            }
        }
        Ok(Self {
            within,
            mechanisms: map,
            process_graph,
        })
    }

    /// Union of the process graphs, with the layering.
    pub fn within(&self) -> &LayeredDag {
        &self.within
    }

    pub fn n_processes(&self) -> usize {
        self.within.n_processes()
    }

    /// The process graph of process `k` (1-based) as a standalone DAG.
    pub fn process_graph(&self, k: usize) -> Result<Dag> {
        let names: Vec<NodeId> = self
            .within
            .process_nodes(k)
            .into_iter()
            .map(|i| self.within.dag().node(i).to_string())
            .collect();
        self.within.dag().induced(&names)
    }

    pub fn mechanism(&self, target: &str) -> Option<&MechanismSpec> {
        self.mechanisms.get(target)
    }

    pub fn mechanisms(&self) -> impl Iterator<Item = &MechanismSpec> {
        self.mechanisms.values()
    }

    pub fn process_level_graph(&self) -> Option<&[(usize, usize)]> {
        self.process_graph.as_deref()
    }

    /// Parent processes of `t` in the process-level graph, if one is set.
    pub fn process_parents(&self, t: usize) -> Option<Vec<usize>> {
        self.process_graph
            .as_ref()
            .map(|pg| pg.iter().filter(|&&(_, b)| b == t).map(|&(a, _)| a).collect())
    }
}

/// Ground truth = union of the process graphs plus learned edges across
/// processes. Each cross edge must run from an earlier to a later process.
pub fn merge_ground_truth(prior: &PriorKnowledge, cross_edges: &[(NodeId, NodeId)]) -> Result<LayeredDag> {
    let within = prior.within();
    let dag = within.dag();
    let mut edges = dag.edges();
    for (a, b) in cross_edges {
        let ia = dag.index_of(a)?;
        let ib = dag.index_of(b)?;
        let (pa, pb) = (within.process_of(ia), within.process_of(ib));
        if pa >= pb {
            return Err(Error::Structural(format!(
                "cross edge {a} -> {b} runs from process {pa} to process {pb}"
            )));
        }
        edges.push((ia, ib));
    }
    within.with_edges(edges)
}
