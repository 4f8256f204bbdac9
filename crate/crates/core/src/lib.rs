mod codec;
pub mod data;
pub mod discovery;
pub mod drf;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod refline;
pub mod spam;
pub mod synth;

pub use data::DatasetTable;
pub use error::{Error, Result};
pub use graph::{Cpdag, Dag, LayeredDag, NodeId, PriorKnowledge};
