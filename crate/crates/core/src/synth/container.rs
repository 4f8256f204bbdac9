//! Single-file model container.
//!
//! Byte layout (integers little-endian):
//!
//! ```text
//! magic      8 bytes  "SSYNMODL"
//! version    u32
//! sections   u32      number of sections
//! per section:
//!   tag      4 bytes  "META" | "SRCS" | "FRST"
//!   length   u64      payload length
//!   sha256   32 bytes digest of the payload
//!   payload  length bytes
//! ```
//!
//! META is JSON (graph, causal order, fit metadata). SRCS holds the source
//! bootstrap specs and FRST the forests, both in the binary encoding of
//! `codec`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{FitMeta, NodeModel, PipelineModel, SmoothBootstrapSpec};
use crate::codec::{Decoder, Encoder};
use crate::drf::DistributionalForest;
use crate::error::{Error, Result};
use crate::graph::{GraphFile, NodeId};

const MAGIC: &[u8; 8] = b"SSYNMODL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Meta {
    graph: GraphFile,
    order: Vec<NodeId>,
    fit: FitMeta,
}

fn section(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(payload));
    out.extend_from_slice(payload);
}

/// Serializes a model into container bytes.
pub fn write_model(model: &PipelineModel) -> Result<Vec<u8>> {
    let meta = Meta {
        graph: GraphFile::from_layered(model.dag()),
        order: model.order().to_vec(),
        fit: model.meta().clone(),
    };
    let meta = serde_json::to_vec(&meta)?;

    let mut src = Encoder::default();
    let sources: Vec<_> = model.sources().collect();
    src.len(sources.len());
    for (name, s) in sources {
        src.str(name);
        src.f64s(s.values());
        src.f64(s.bandwidth());
    }
    let mut frs = Encoder::default();
    let forests: Vec<_> = model.forests().collect();
    frs.len(forests.len());
    for (_, f) in forests {
        f.encode(&mut frs);
    }

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&3u32.to_le_bytes());
    section(&mut out, b"META", &meta);
    section(&mut out, b"SRCS", &src.buf);
    section(&mut out, b"FRST", &frs.buf);
    Ok(out)
}

/// Parses container bytes, verifying version and per-section checksums.
pub fn read_model(bytes: &[u8]) -> Result<PipelineModel> {
    let mut d = Decoder::new(bytes, "header");
    if d.take(MAGIC.len())? != MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = d.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let count = d.u32()?;
    let mut sections: BTreeMap<[u8; 4], &[u8]> = BTreeMap::new();
    for _ in 0..count {
        let tag: [u8; 4] = d.take(4)?.try_into().unwrap();
        let name = String::from_utf8_lossy(&tag).into_owned();
        let len = d.u64()?;
        let digest = d.take(32)?;
        let len = usize::try_from(len).map_err(|_| Error::Format(format!("section {name} too large")))?;
        let payload = d.take(len).map_err(|_| Error::Truncated(format!("section {name} cut short")))?;
        if Sha256::digest(payload).as_slice() != digest {
            return Err(Error::Checksum(name));
        }
        if sections.insert(tag, payload).is_some() {
            return Err(Error::Format(format!("section {name} appears twice")));
        }
    }
    if !d.is_empty() {
        return Err(Error::Format("trailing bytes after last section".into()));
    }
    let get = |tag: &[u8; 4]| {
        sections
            .get(tag)
            .copied()
            .ok_or_else(|| Error::Format(format!("missing section {}", String::from_utf8_lossy(tag))))
    };

    let meta: Meta = serde_json::from_slice(get(b"META")?)?;
    let dag = meta.graph.to_layered()?;
    let mut nodes = BTreeMap::new();

    let mut s = Decoder::new(get(b"SRCS")?, "sources");
    let n = s.len(24)?;
    for _ in 0..n {
        let name = s.string()?;
        let values = s.f64s()?;
        let bw = s.f64()?;
        let spec = SmoothBootstrapSpec::new(values, bw).map_err(|e| Error::Format(e.to_string()))?;
        nodes.insert(name, NodeModel::Source(spec));
    }
    let mut f = Decoder::new(get(b"FRST")?, "forests");
    let n = f.len(40)?;
    for _ in 0..n {
        let forest = DistributionalForest::decode(&mut f)?;
        nodes.insert(forest.target().to_string(), NodeModel::Conditional(forest));
    }
    if !s.is_empty() || !f.is_empty() {
        return Err(Error::Format("unread bytes inside a section".into()));
    }
    PipelineModel::assemble(dag, meta.order, nodes, meta.fit)
}

pub fn save_model(model: &PipelineModel, path: &Path) -> Result<()> {
    std::fs::write(path, write_model(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<PipelineModel> {
    read_model(&std::fs::read(path)?)
}
