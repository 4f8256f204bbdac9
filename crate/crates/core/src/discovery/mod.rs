//! Structure-learning baselines and the registry used by the benchmark.

mod ci;
mod lasso;
mod lbfgs;
mod lingam;
mod notears;
mod pc;
mod snr;

pub use ci::{fisher_z_from_r, fisher_z_test, CiTest, CiTestResult, DSepOracle, FisherZ};
pub use lingam::{direct_lingam, lingam_order, EntropyConstants};
pub use notears::{acyclicity, notears_linear, NotearsConfig, WeightedAdjacency};
pub use pc::{complete_to_dag, cpdag_of, pc_stable, pc_with_test, PcConfig};
pub use snr::sortnregress;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::graph::Dag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    Pc,
    Lingam,
    Notears,
    Sortnregress,
}

/// What an algorithm run produced besides the graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunNotes {
    /// PC: the CPDAG had no consistent extension.
    pub lenient_completion: bool,
    /// NOTEARS: the constraint was not met.
    pub not_converged: bool,
    /// NOTEARS: cycle edges removed after thresholding.
    pub pruned: Vec<(String, String, f64)>,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Pc,
        Algorithm::Lingam,
        Algorithm::Notears,
        Algorithm::Sortnregress,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Algorithm::Pc => "pc",
            Algorithm::Lingam => "lingam",
            Algorithm::Notears => "notears",
            Algorithm::Sortnregress => "snr",
        }
    }

    pub fn from_key(key: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.key() == key)
            .ok_or_else(|| Error::Input(format!("unknown algorithm `{key}` (expected pc, lingam, notears or snr)")))
    }

    /// Runs the algorithm with its default settings. PC's CPDAG is turned
    /// into a DAG by a seeded consistent extension.
    pub fn learn(self, data: &DatasetTable, seed: u64) -> Result<(Dag, RunNotes)> {
        let mut notes = RunNotes::default();
        let dag = match self {
            Algorithm::Pc => {
                let c = pc_stable(data, &PcConfig::default())?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (d, lenient) = complete_to_dag(&c, &mut rng)?;
                notes.lenient_completion = lenient;
                d
            }
            Algorithm::Lingam => direct_lingam(data)?,
            Algorithm::Notears => {
                let w = notears_linear(data, &NotearsConfig::default())?;
                notes.not_converged = !w.converged;
                notes.pruned = w
                    .pruned
                    .iter()
                    .map(|&(a, b, v)| (w.nodes[a].clone(), w.nodes[b].clone(), v))
                    .collect();
                w.dag()?
            }
            Algorithm::Sortnregress => sortnregress(data)?,
        };
        Ok((dag, notes))
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}
