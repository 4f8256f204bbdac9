//! Graph JSON interchange format:
//!
//! ```json
//! {"processes":[{"index":1,"station":1,"nodes":["..."]}],
//!  "edges":[["src","tgt"]],
//!  "mechanisms":[{"target":"...","inputs":["..."],"prediction_column":"..."}]}
//! ```
//!
//! A prior file may additionally carry `"process_graph": [[j, t], ...]`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dag, LayeredDag, MechanismSpec, NodeId, PriorKnowledge};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessEntry {
    pub index: usize,
    pub station: usize,
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismEntry {
    pub target: NodeId,
    pub inputs: Vec<NodeId>,
    pub prediction_column: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphFile {
    pub processes: Vec<ProcessEntry>,
    pub edges: Vec<(NodeId, NodeId)>,
    #[serde(default)]
    pub mechanisms: Vec<MechanismEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process_graph: Option<Vec<(usize, usize)>>,
}

impl GraphFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Validates the layering and builds the graph. Rejects duplicate
    /// nodes, dangling edge endpoints and layer violations.
    pub fn to_layered(&self) -> Result<LayeredDag> {
        let mut procs = self.processes.clone();
        procs.sort_by_key(|p| p.index);
        let mut nodes = Vec::new();
        let mut process_of = Vec::new();
        let mut stations = Vec::new();
        for (k, p) in procs.iter().enumerate() {
            if p.index != k + 1 {
                return Err(Error::Input(format!(
                    "process indices must be 1..=K without gaps; found {}",
                    p.index
                )));
            }
            stations.push(p.station);
            for n in &p.nodes {
                nodes.push(n.clone());
                process_of.push(p.index);
            }
        }
        let mut seen = HashMap::new();
        for n in &nodes {
            if seen.insert(n.as_str(), ()).is_some() {
                return Err(Error::Input(format!("duplicate node `{n}`")));
            }
        }
        for (a, b) in &self.edges {
            for end in [a, b] {
                if !seen.contains_key(end.as_str()) {
                    return Err(Error::Input(format!("edge endpoint `{end}` is not a declared node")));
                }
            }
        }
        let dag = Dag::from_named_edges(nodes, &self.edges)?;
        LayeredDag::new(dag, process_of, stations)
    }

    pub fn to_prior(&self) -> Result<PriorKnowledge> {
        let within = self.to_layered()?;
        let mechanisms = self
            .mechanisms
            .iter()
            .map(|m| MechanismSpec {
                target: m.target.clone(),
                inputs: m.inputs.clone(),
                prediction_column: m.prediction_column.clone(),
            })
            .collect();
        PriorKnowledge::new(within, mechanisms, self.process_graph.clone())
    }

    pub fn from_layered(g: &LayeredDag) -> Self {
        let processes = (1..=g.n_processes())
            .map(|k| ProcessEntry {
                index: k,
                station: g.station_of_process(k),
                nodes: g
                    .process_nodes(k)
                    .into_iter()
                    .map(|i| g.dag().node(i).to_string())
                    .collect(),
            })
            .collect();
        Self {
            processes,
            edges: g.dag().named_edges(),
            mechanisms: Vec::new(),
            process_graph: None,
        }
    }

    pub fn from_prior(prior: &PriorKnowledge) -> Self {
        let mut f = Self::from_layered(prior.within());
        f.mechanisms = prior
            .mechanisms()
            .map(|m| MechanismEntry {
                target: m.target.clone(),
                inputs: m.inputs.clone(),
                prediction_column: m.prediction_column.clone(),
            })
            .collect();
        f.process_graph = prior.process_level_graph().map(<[_]>::to_vec);
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG4: &str = r#"{
        "processes": [
            {"index": 1, "station": 1, "nodes": ["1", "2", "3"]},
            {"index": 2, "station": 1, "nodes": ["4", "5", "6"]}
        ],
        "edges": [["1","2"],["2","3"],["5","6"],["2","4"],["3","5"]]
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let f: GraphFile = serde_json::from_str(FIG4).unwrap();
        let g = f.to_layered().unwrap();
        assert_eq!(g.dag().n_edges(), 5);
        let back = GraphFile::from_layered(&g);
        assert_eq!(back.to_layered().unwrap(), g);
    }

    #[test]
    fn rejects_duplicates_dangling_and_layer_violations() {
        let dup = FIG4.replace(r#"["4", "5", "6"]"#, r#"["4", "5", "1"]"#);
        assert!(serde_json::from_str::<GraphFile>(&dup).unwrap().to_layered().is_err());

        let dangling = FIG4.replace(r#"["3","5"]"#, r#"["3","9"]"#);
        let err = serde_json::from_str::<GraphFile>(&dangling)
            .unwrap()
            .to_layered()
            .unwrap_err();
        assert!(err.to_string().contains('9'));

        let backward = FIG4.replace(r#"["3","5"]"#, r#"["5","3"]"#);
        assert!(serde_json::from_str::<GraphFile>(&backward)
            .unwrap()
            .to_layered()
            .is_err());
    }
}
