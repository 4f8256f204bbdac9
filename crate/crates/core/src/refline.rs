//! Seeded reference assembly line: a layered DAG over stations and
//! processes, additive structural equations and sampled data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{mean_sd, DatasetTable};
use crate::error::{Error, Result};
use crate::graph::{Dag, LayeredDag, MechanismSpec, NodeId, PriorKnowledge};
use crate::spam::SplineBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismFamily {
    Linear,
    SplineNonlinear,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseFamily {
    Gaussian,
    Uniform,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineConfig {
    pub station_node_counts: Vec<usize>,
    pub processes_per_station: usize,
    /// Probability of each forward pair inside a process.
    pub within_process_edge_density: f64,
    /// Probability of each pair (earlier process, later process).
    pub cross_edge_density: f64,
    pub mechanism_family: MechanismFamily,
    pub noise_family: NoiseFamily,
    /// Fraction of nodes with process parents whose within-process
    /// mechanism is published as a prediction column.
    pub mechanism_fraction: f64,
    pub rows: usize,
    pub seed: u64,
}

impl Default for LineConfig {
    fn default() -> Self {
        Self {
            station_node_counts: vec![6, 34, 16, 26, 16],
            processes_per_station: 2,
            within_process_edge_density: 0.3,
            cross_edge_density: 0.01,
            mechanism_family: MechanismFamily::SplineNonlinear,
            noise_family: NoiseFamily::Mixed,
            mechanism_fraction: 0.25,
            rows: 15581,
            seed: 0,
        }
    }
}

impl LineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.station_node_counts.is_empty() {
            return Err(Error::Input("at least one station required".into()));
        }
        if self.processes_per_station == 0 {
            return Err(Error::Input("processes_per_station must be positive".into()));
        }
        if let Some(&c) = self
            .station_node_counts
            .iter()
            .find(|&&c| c < self.processes_per_station)
        {
            return Err(Error::Input(format!(
                "a station with {c} nodes cannot hold {} processes",
                self.processes_per_station
            )));
        }
        let unit = |name: &str, v: f64, zero_ok: bool| {
            if (v > 0.0 || (zero_ok && v == 0.0)) && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::Input(format!("{name} must lie in (0, 1], got {v}")))
            }
        };
        unit("within_process_edge_density", self.within_process_edge_density, false)?;
        // zero cross density is allowed: the prior then is the whole truth
        unit("cross_edge_density", self.cross_edge_density, true)?;
        unit("mechanism_fraction", self.mechanism_fraction, true)?;
        if self.rows < 2 {
            return Err(Error::Input("at least 2 rows required".into()));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.station_node_counts.iter().sum()
    }
}

/// A generated line: the true layered graph, the prior an expert would hold
/// (process graphs plus some mechanisms), the data and the mechanism
/// prediction columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RefLine {
    pub truth: LayeredDag,
    pub prior: PriorKnowledge,
    pub data: DatasetTable,
    pub predictions: DatasetTable,
}

pub fn node_name(station: usize, process: usize, k: usize) -> NodeId {
    format!("Station{station}_Process{process}_V{k:02}")
}

pub fn prediction_name(node: &str) -> String {
    format!("{node}_pred")
}

#[derive(Clone, Copy)]
enum Noise {
    Gaussian,
    Uniform,
    Laplace,
}

impl Noise {
    /// Unit-variance draw.
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Noise::Gaussian => Normal::new(0.0, 1.0).unwrap().sample(rng),
            Noise::Uniform => rng.random_range(-3f64.sqrt()..3f64.sqrt()),
            Noise::Laplace => {
                let u: f64 = rng.random_range(-0.5..0.5);
                -u.signum() * (1.0 - 2.0 * u.abs()).ln() / 2f64.sqrt()
            }
        }
    }
}

/// Random smooth function of a parent column: a cubic spline whose
/// coefficients follow a random walk with drift, or a linear map.
fn edge_effect<R: Rng + ?Sized>(parent: &[f64], spline: bool, rng: &mut R) -> Result<Vec<f64>> {
    let (m, sd) = mean_sd(parent);
    if !(sd > 0.0) {
        return Ok(vec![0.0; parent.len()]);
    }
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    if !spline {
        let w = sign * rng.random_range(0.5..1.5);
        return Ok(parent.iter().map(|v| w * (v - m) / sd).collect());
    }
    let basis = SplineBasis::fit(parent, 6)?;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut c = Vec::with_capacity(6);
    let mut acc = 0.0;
    for _ in 0..6 {
        acc += sign * 0.5 + normal.sample(rng);
        c.push(acc);
    }
    let mut buf = vec![0.0; 6];
    Ok(parent
        .iter()
        .map(|&v| {
            basis.eval_into(v, &mut buf);
            buf.iter().zip(&c).map(|(b, c)| b * c).sum()
        })
        .collect())
}

pub fn generate_line(cfg: &LineConfig) -> Result<RefLine> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pps = cfg.processes_per_station;

    let mut names = Vec::new();
    let mut process_of = Vec::new();
    let mut station_of_process = Vec::new();
    let mut process = 0;
    for (s, &count) in cfg.station_node_counts.iter().enumerate() {
        for q in 0..pps {
            process += 1;
            station_of_process.push(s + 1);
            let size = count / pps + usize::from(q < count % pps);
            for k in 1..=size {
                names.push(node_name(s + 1, process, k));
                process_of.push(process);
            }
        }
    }
    let p = names.len();

    // Nodes are listed process by process, so index order is a valid
    // causal order.
    let mut within = Vec::new();
    let mut cross = Vec::new();
    for b in 0..p {
        for a in 0..b {
            if process_of[a] == process_of[b] {
                if rng.random::<f64>() < cfg.within_process_edge_density {
                    within.push((a, b));
                }
            } else if rng.random::<f64>() < cfg.cross_edge_density {
                cross.push((a, b));
            }
        }
    }
    let all: Vec<(usize, usize)> = within.iter().chain(&cross).copied().collect();
    let truth = LayeredDag::new(Dag::new(names.clone(), all)?, process_of.clone(), station_of_process.clone())?;
    let within_dag = LayeredDag::new(Dag::new(names.clone(), within)?, process_of, station_of_process)?;

    let n = cfg.rows;
    let dag = truth.dag();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); p];
    let mut mechanisms = Vec::new();
    let mut pred_names = Vec::new();
    let mut pred_cols = Vec::new();
    for v in 0..p {
        let noise = match cfg.noise_family {
            NoiseFamily::Gaussian => Noise::Gaussian,
            NoiseFamily::Uniform => Noise::Uniform,
            NoiseFamily::Mixed => [Noise::Gaussian, Noise::Uniform, Noise::Laplace][rng.random_range(0..3)],
        };
        let scale = rng.random_range(0.2f64.ln()..5f64.ln()).exp();
        let noise_sd = rng.random_range(0.5..1.0);
        let signal = rng.random_range(0.5..1.5);
        let mut own = vec![0.0; n];
        let mut total = vec![0.0; n];
        let mut within_parents = Vec::new();
        for &u in dag.parents(v) {
            let spline = match cfg.mechanism_family {
                MechanismFamily::Linear => false,
                MechanismFamily::SplineNonlinear => true,
                MechanismFamily::Mixed => rng.random::<bool>(),
            };
            let eff = edge_effect(&cols[u], spline, &mut rng)?;
            let same = truth.process_of(u) == truth.process_of(v);
            if same {
                within_parents.push(dag.node(u).to_string());
            }
            for r in 0..n {
                total[r] += eff[r];
                if same {
                    own[r] += eff[r];
                }
            }
        }
        let (_, sd) = mean_sd(&total);
        let norm = if sd > 1e-12 { scale * signal / sd } else { 0.0 };
        let col: Vec<f64> = (0..n)
            .map(|r| norm * total[r] + scale * noise_sd * noise.draw(&mut rng))
            .collect();
        if !within_parents.is_empty() && rng.random::<f64>() < cfg.mechanism_fraction {
            let name = dag.node(v).to_string();
            let pred = prediction_name(&name);
            mechanisms.push(MechanismSpec {
                target: name,
                inputs: within_parents,
                prediction_column: pred.clone(),
            });
            pred_names.push(pred);
            pred_cols.push(own.iter().map(|x| norm * x).collect());
        }
        cols[v] = col;
    }
    let data = DatasetTable::new(names, cols)?;
    if !data.all_finite() {
        return Err(Error::Numeric("generated data is not finite".into()));
    }
    Ok(RefLine {
        truth,
        prior: PriorKnowledge::new(within_dag, mechanisms, None)?,
        data,
        predictions: DatasetTable::new(pred_names, pred_cols)?,
    })
}

/// Six nodes in two processes, V1 = {1, 2, 3} and V2 = {4, 5, 6}, with
/// process graphs 1 -> 2 -> 3 and 5 -> 6 and cross edges 2 -> 4, 3 -> 5.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig4Fixture {
    pub truth: LayeredDag,
    pub prior: PriorKnowledge,
}

pub fn fig4_fixture() -> Fig4Fixture {
    let nodes: Vec<NodeId> = (1..=6).map(|i| i.to_string()).collect();
    let within = Dag::new(nodes.clone(), [(0, 1), (1, 2), (4, 5)]).expect("fixed graph");
    let truth = Dag::new(nodes, [(0, 1), (1, 2), (4, 5), (1, 3), (2, 4)]).expect("fixed graph");
    let layer = |d| LayeredDag::new(d, vec![1, 1, 1, 2, 2, 2], vec![1, 1]).expect("fixed layering");
    Fig4Fixture {
        truth: layer(truth),
        prior: PriorKnowledge::new(layer(within), vec![], None).expect("fixed prior"),
    }
}

impl Fig4Fixture {
    /// Draws `n` rows from polynomial additive equations of degree at most
    /// three along the truth, so each mechanism lies in the cubic spline
    /// space.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DatasetTable {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut cols = vec![Vec::with_capacity(n); 6];
        for _ in 0..n {
            let x1 = rng.random_range(-2.0..2.0);
            let mut e = |sd: f64| sd * normal.sample(rng);
            let x2 = x1 + 0.25 * x1 * x1 + e(0.5);
            let x3 = 0.8 * x2 - 0.15 * x2 * x2 + e(0.5);
            let x4 = 0.3 * x2 * x2 - 0.5 * x2 + e(0.5);
            let x5 = 0.7 * x3 + 0.1 * x3 * x3 * x3 + e(0.5);
            let x6 = 0.8 * x5 - 0.2 * x5 * x5 + e(0.5);
            for (c, v) in cols.iter_mut().zip([x1, x2, x3, x4, x5, x6]) {
                c.push(v);
            }
        }
        DatasetTable::new(self.truth.dag().nodes().to_vec(), cols).expect("fixed columns")
    }
}
