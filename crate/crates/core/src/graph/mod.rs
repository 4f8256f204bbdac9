//! Directed acyclic graphs, layered (process-partitioned) DAGs, CPDAGs and
//! the prior-knowledge container used to assemble a ground-truth graph.

mod cpdag;
pub(crate) mod dsep;
mod json;
mod prior;

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use cpdag::{dag_from_cpdag, Cpdag};
pub use dsep::d_separated;
pub use json::{GraphFile, MechanismEntry, ProcessEntry};
pub use prior::{merge_ground_truth, MechanismSpec, PriorKnowledge};

pub type NodeId = String;

/// Immutable directed acyclic graph over named nodes.
///
/// Nodes are addressed by position; names are kept for I/O and for the
/// lexicographic tie-break in [`Dag::topological_order`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl Dag {
    /// Builds a DAG from index pairs. Duplicate edges are merged; self loops
    /// and cycles are rejected.
    pub fn new<I>(nodes: Vec<NodeId>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let p = nodes.len();
        let mut index = HashMap::with_capacity(p);
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate node `{n}`")));
            }
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= p || b >= p {
                return Err(Error::Input(format!("edge ({a}, {b}) out of range for {p} nodes")));
            }
            if a == b {
                return Err(Error::Structural(format!("self loop on `{}`", nodes[a])));
            }
            set.insert((a, b));
        }
        let mut parents = vec![Vec::new(); p];
        let mut children = vec![Vec::new(); p];
        for &(a, b) in &set {
            parents[b].push(a);
            children[a].push(b);
        }
        let dag = Self {
            nodes,
            index,
            parents,
            children,
        };
        if let Some(cycle) = dag.find_cycle() {
            let names: Vec<&str> = cycle.iter().map(|&i| dag.nodes[i].as_str()).collect();
            return Err(Error::Structural(format!("cycle detected: {}", names.join(" -> "))));
        }
        Ok(dag)
    }

    pub fn from_named_edges(nodes: Vec<NodeId>, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let index: HashMap<&str, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut pairs = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let ia = *index.get(a.as_str()).ok_or_else(|| Error::UnknownNode(a.clone()))?;
            let ib = *index.get(b.as_str()).ok_or_else(|| Error::UnknownNode(b.clone()))?;
            pairs.push((ia, ib));
        }
        Self::new(nodes, pairs)
    }

    pub fn empty(nodes: Vec<NodeId>) -> Result<Self> {
        Self::new(nodes, std::iter::empty())
    }

    /// Builds a DAG from the support of a square matrix (`m[(i, j)] != 0` is
    /// the edge i -> j).
    pub fn from_adjacency(nodes: Vec<NodeId>, m: &DMatrix<f64>) -> Result<Self> {
        let p = nodes.len();
        if m.nrows() != p || m.ncols() != p {
            return Err(Error::Input(format!(
                "{}x{} adjacency matrix for {p} nodes",
                m.nrows(),
                m.ncols()
            )));
        }
        let edges = (0..p)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && m[(i, j)] != 0.0);
        Self::new(nodes, edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.children[a].binary_search(&b).is_ok()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    /// All edges as sorted index pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(a, ch)| ch.iter().map(move |&b| (a, b)))
            .collect()
    }

    pub fn named_edges(&self) -> Vec<(NodeId, NodeId)> {
        self.edges()
            .into_iter()
            .map(|(a, b)| (self.nodes[a].clone(), self.nodes[b].clone()))
            .collect()
    }

    pub fn parent_names(&self, i: usize) -> Vec<NodeId> {
        self.parents[i].iter().map(|&p| self.nodes[p].clone()).collect()
    }

    /// 0/1 adjacency matrix, `a[(i, j)] = 1` iff i -> j.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let p = self.n_nodes();
        let mut m = DMatrix::zeros(p, p);
        for (a, b) in self.edges() {
            m[(a, b)] = 1.0;
        }
        m
    }

    /// Topological order with ties broken by a caller-supplied key (smallest
    /// first). Only valid on acyclic graphs, which construction guarantees.
    pub(crate) fn topological_order_by<K: Ord>(&self, key: impl Fn(usize) -> K) -> Vec<usize> {
        let p = self.n_nodes();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut heap: BinaryHeap<Reverse<(K, usize)>> = (0..p)
            .filter(|&i| indeg[i] == 0)
            .map(|i| Reverse((key(i), i)))
            .collect();
        let mut order = Vec::with_capacity(p);
        while let Some(Reverse((_, i))) = heap.pop() {
            order.push(i);
            for &c in &self.children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    heap.push(Reverse((key(c), c)));
                }
            }
        }
        debug_assert_eq!(order.len(), p);
        order
    }

    /// Topological order; among available nodes the lexicographically
    /// smallest id goes first.
    pub fn topological_order(&self) -> Vec<usize> {
        self.topological_order_by(|i| self.nodes[i].clone())
    }

    pub fn causal_order(&self) -> Vec<NodeId> {
        self.topological_order()
            .into_iter()
            .map(|i| self.nodes[i].clone())
            .collect()
    }

    /// Nodes of `set` plus all their ancestors.
    pub fn ancestral_closure(&self, set: &[usize]) -> Vec<bool> {
        let mut mark = vec![false; self.n_nodes()];
        let mut stack: Vec<usize> = set.to_vec();
        while let Some(v) = stack.pop() {
            if !mark[v] {
                mark[v] = true;
                stack.extend(self.parents[v].iter().copied());
            }
        }
        mark
    }

    /// Subgraph induced by the named nodes, in the given order.
    pub fn induced(&self, keep: &[NodeId]) -> Result<Dag> {
        let idx: Vec<usize> = keep.iter().map(|n| self.index_of(n)).collect::<Result<_>>()?;
        let pos: HashMap<usize, usize> = idx.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let edges: Vec<(usize, usize)> = self
            .edges()
            .into_iter()
            .filter_map(|(a, b)| Some((*pos.get(&a)?, *pos.get(&b)?)))
            .collect();
        Dag::new(keep.to_vec(), edges)
    }

    /// The same graph with its node list permuted into `order` (names).
    pub fn relabeled_order(&self, order: &[NodeId]) -> Result<Dag> {
        if order.len() != self.n_nodes() {
            return Err(Error::Input("node list length mismatch".into()));
        }
        self.induced(order)
    }

    /// Whether both graphs carry the same node names in the same positions.
    pub fn same_nodes(&self, other: &Dag) -> bool {
        self.nodes == other.nodes
    }

    fn find_cycle(&self) -> Option<Vec<usize>> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let p = self.n_nodes();
        let mut state = vec![0u8; p];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut path: Vec<usize> = Vec::new();
        for start in 0..p {
            if state[start] != 0 {
                continue;
            }
            stack.push((start, 0));
            state[start] = 1;
            path.push(start);
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if *next < self.children[v].len() {
                    let c = self.children[v][*next];
                    *next += 1;
                    match state[c] {
                        0 => {
                            state[c] = 1;
                            stack.push((c, 0));
                            path.push(c);
                        }
                        1 => {
                            let at = path.iter().position(|&x| x == c).unwrap();
                            let mut cycle = path[at..].to_vec();
                            cycle.push(c);
                            return Some(cycle);
                        }
                        _ => {}
                    }
                } else {
                    state[v] = 2;
                    stack.pop();
                    path.pop();
                }
            }
        }
        None
    }
}

/// A DAG whose nodes are partitioned into consecutive processes 1..=K, each
/// process housed in a station. No edge points from a later process into an
/// earlier one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredDag {
    dag: Dag,
    process_of: Vec<usize>,
    station_of_process: Vec<usize>,
}

impl LayeredDag {
    /// `process_of[i]` is the 1-based process of node i;
    /// `station_of_process[k - 1]` is the station housing process k.
    pub fn new(dag: Dag, process_of: Vec<usize>, station_of_process: Vec<usize>) -> Result<Self> {
        if process_of.len() != dag.n_nodes() {
            return Err(Error::Input(format!(
                "process assignment covers {} of {} nodes",
                process_of.len(),
                dag.n_nodes()
            )));
        }
        let k = station_of_process.len();
        let mut used = vec![false; k];
        for (i, &pr) in process_of.iter().enumerate() {
            if pr == 0 || pr > k {
                return Err(Error::Input(format!(
                    "node `{}` assigned to process {pr}, expected 1..={k}",
                    dag.node(i)
                )));
            }
            used[pr - 1] = true;
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(Error::Input(format!(
                "processes must be consecutive: process {} has no nodes",
                missing + 1
            )));
        }
        if station_of_process.first().is_some_and(|&s| s == 0)
            || station_of_process.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::Input(
                "stations must be positive and non-decreasing along processes".into(),
            ));
        }
        for (a, b) in dag.edges() {
            if process_of[a] > process_of[b] {
                return Err(Error::Structural(format!(
                    "edge {} -> {} points from process {} back to process {}",
                    dag.node(a),
                    dag.node(b),
                    process_of[a],
                    process_of[b]
                )));
            }
        }
        Ok(Self {
            dag,
            process_of,
            station_of_process,
        })
    }

    /// Single-process layering over a plain DAG.
    pub fn single_process(dag: Dag) -> Self {
        let p = dag.n_nodes();
        Self {
            dag,
            process_of: vec![1; p],
            station_of_process: vec![1],
        }
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn n_processes(&self) -> usize {
        self.station_of_process.len()
    }

    pub fn process_of(&self, i: usize) -> usize {
        self.process_of[i]
    }

    pub fn station_of_process(&self, process: usize) -> usize {
        self.station_of_process[process - 1]
    }

    pub fn station_of(&self, i: usize) -> usize {
        self.station_of_process(self.process_of[i])
    }

    pub fn stations(&self) -> Vec<usize> {
        let mut s = self.station_of_process.clone();
        s.dedup();
        s
    }

    /// Node indices of process `k`, in node order.
    pub fn process_nodes(&self, k: usize) -> Vec<usize> {
        (0..self.dag.n_nodes()).filter(|&i| self.process_of[i] == k).collect()
    }

    pub fn station_nodes(&self, s: usize) -> Vec<usize> {
        (0..self.dag.n_nodes()).filter(|&i| self.station_of(i) == s).collect()
    }

    /// Causal order: processes in sequence, topological within, ties broken
    /// lexicographically by node id.
    pub fn causal_order(&self) -> Vec<NodeId> {
        self.dag
            .topological_order_by(|i| (self.process_of[i], self.dag.node(i).to_string()))
            .into_iter()
            .map(|i| self.dag.node(i).to_string())
            .collect()
    }

    /// Hash of the node layering and edge set, independent of the order in
    /// which nodes and edges are listed.
    pub fn fingerprint(&self) -> String {
        let mut nodes: Vec<(&str, usize, usize)> = (0..self.dag.n_nodes())
            .map(|i| (self.dag.node(i), self.process_of(i), self.station_of(i)))
            .collect();
        nodes.sort();
        let mut edges = self.dag.named_edges();
        edges.sort();
        let mut h = Sha256::new();
        for (n, p, s) in nodes {
            h.update((n.len() as u64).to_le_bytes());
            h.update(n.as_bytes());
            h.update((p as u64).to_le_bytes());
            h.update((s as u64).to_le_bytes());
        }
        for (a, b) in edges {
            for x in [a, b] {
                h.update((x.len() as u64).to_le_bytes());
                h.update(x.as_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Same layering with a different edge set.
    pub fn with_edges<I>(&self, edges: I) -> Result<LayeredDag>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let dag = Dag::new(self.dag.nodes().to_vec(), edges)?;
        LayeredDag::new(dag, self.process_of.clone(), self.station_of_process.clone())
    }

    /// Subgraph on the nodes of one station. Processes are renumbered from 1
    /// and the station keeps its index.
    pub fn station_subgraph(&self, station: usize) -> Result<LayeredDag> {
        let idx = self.station_nodes(station);
        if idx.is_empty() {
            return Err(Error::Input(format!("station {station} has no nodes")));
        }
        let names: Vec<NodeId> = idx.iter().map(|&i| self.dag.node(i).to_string()).collect();
        let dag = self.dag.induced(&names)?;
        let first = idx.iter().map(|&i| self.process_of[i]).min().unwrap();
        let last = idx.iter().map(|&i| self.process_of[i]).max().unwrap();
        let process_of = idx.iter().map(|&i| self.process_of[i] - first + 1).collect();
        let stations = vec![station; last - first + 1];
        LayeredDag::new(dag, process_of, stations)
    }
}
