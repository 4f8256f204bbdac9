//! PC-stable and CPDAG orientation rules.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ci::{CiTest, FisherZ};
use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::graph::{dag_from_cpdag, Cpdag, Dag, NodeId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcConfig {
    pub alpha: f64,
    /// Largest conditioning set size; unlimited when `None`.
    pub max_depth: Option<usize>,
}

impl Default for PcConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            max_depth: None,
        }
    }
}

/// PC-stable with Fisher-z tests. Variables are processed in name order, so
/// the result does not depend on the column order of `data`; the returned
/// CPDAG uses the column order of `data`.
pub fn pc_stable(data: &DatasetTable, config: &PcConfig) -> Result<Cpdag> {
    if data.n_cols() < 2 {
        return Err(Error::Input("PC needs at least two variables".into()));
    }
    let mut sorted: Vec<NodeId> = data.names().to_vec();
    sorted.sort();
    let canonical = data.select(&sorted)?;
    let test = FisherZ::new(&canonical, config.alpha)?;
    let c = pc_with_test(&test, sorted, config.max_depth)?;
    reorder(&c, data.names())
}

fn reorder(c: &Cpdag, order: &[NodeId]) -> Result<Cpdag> {
    let pos: HashMap<&str, usize> = order.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let map = |i: usize| pos[c.nodes()[i].as_str()];
    Cpdag::new(
        order.to_vec(),
        c.directed().iter().map(|&(a, b)| (map(a), map(b))),
        c.undirected().iter().map(|&(a, b)| (map(a), map(b))),
    )
}

/// k-subsets of `items` in lexicographic order of positions.
fn for_each_subset(items: &[usize], k: usize, mut f: impl FnMut(&[usize]) -> Result<bool>) -> Result<bool> {
    if k > items.len() {
        return Ok(false);
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf = vec![0; k];
    loop {
        for (b, &i) in buf.iter_mut().zip(&idx) {
            *b = items[i];
        }
        if f(&buf)? {
            return Ok(true);
        }
        // advance
        let mut t = k;
        loop {
            if t == 0 {
                return Ok(false);
            }
            t -= 1;
            if idx[t] != t + items.len() - k {
                break;
            }
            if t == 0 {
                return Ok(false);
            }
        }
        if idx[t] == t + items.len() - k {
            return Ok(false);
        }
        idx[t] += 1;
        for u in t + 1..k {
            idx[u] = idx[u - 1] + 1;
        }
    }
}

/// PC-stable skeleton search, v-structures and Meek closure with any CI
/// test. `names` labels the test's variables.
pub fn pc_with_test(test: &dyn CiTest, names: Vec<NodeId>, max_depth: Option<usize>) -> Result<Cpdag> {
    let p = test.n_vars();
    if names.len() != p {
        return Err(Error::Input("one name per test variable required".into()));
    }
    let mut adj = vec![vec![true; p]; p];
    for (i, row) in adj.iter_mut().enumerate() {
        row[i] = false;
    }
    let mut sepset: HashMap<(usize, usize), Vec<usize>> = HashMap::new();

    let mut depth = 0;
    loop {
        if max_depth.is_some_and(|m| depth > m) {
            break;
        }
        let nbrs: Vec<Vec<usize>> = (0..p).map(|i| (0..p).filter(|&j| adj[i][j]).collect()).collect();
        let pairs: Vec<(usize, usize)> = (0..p)
            .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
            .filter(|&(i, j)| adj[i][j])
            .collect();
        if !pairs
            .iter()
            .any(|&(i, j)| nbrs[i].len() > depth || nbrs[j].len() > depth)
        {
            break;
        }
        let found: Vec<Option<Vec<usize>>> = pairs
            .par_iter()
            .map(|&(i, j)| {
                for (x, y) in [(i, j), (j, i)] {
                    let cand: Vec<usize> = nbrs[x].iter().copied().filter(|&v| v != y).collect();
                    let mut sep = None;
                    let hit = for_each_subset(&cand, depth, |s| {
                        if test.independent(i, j, s)? {
                            sep = Some(s.to_vec());
                            return Ok(true);
                        }
                        Ok(false)
                    })
                    .map_err(|e| Error::Numeric(format!("CI test of ({}, {}) failed: {e}", names[i], names[j])))?;
                    if hit {
                        return Ok(sep);
                    }
                }
                Ok(None)
            })
            .collect::<Result<_>>()?;
        for (&(i, j), s) in pairs.iter().zip(found) {
            if let Some(s) = s {
                adj[i][j] = false;
                adj[j][i] = false;
                sepset.insert((i, j), s);
            }
        }
        depth += 1;
    }

    // Unshielded colliders. An edge that would get arrowheads at both ends
    // stays undirected.
    let mut head = vec![vec![false; p]; p];
    for k in 0..p {
        let nb: Vec<usize> = (0..p).filter(|&v| adj[k][v]).collect();
        for (x, &i) in nb.iter().enumerate() {
            for &j in &nb[x + 1..] {
                if adj[i][j] {
                    continue;
                }
                let s = sepset.get(&(i.min(j), i.max(j)));
                if s.is_some_and(|s| !s.contains(&k)) {
                    head[i][k] = true;
                    head[j][k] = true;
                }
            }
        }
    }
    let mut dir = vec![vec![false; p]; p];
    for a in 0..p {
        for b in 0..p {
            if adj[a][b] && head[a][b] && !head[b][a] {
                dir[a][b] = true;
            }
        }
    }
    meek_closure(&adj, &mut dir);
    to_cpdag(names, &adj, &dir)
}

fn to_cpdag(names: Vec<NodeId>, adj: &[Vec<bool>], dir: &[Vec<bool>]) -> Result<Cpdag> {
    let p = adj.len();
    let mut directed = Vec::new();
    let mut undirected = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            if !adj[a][b] {
                continue;
            }
            match (dir[a][b], dir[b][a]) {
                (true, false) => directed.push((a, b)),
                (false, true) => directed.push((b, a)),
                _ => undirected.push((a, b)),
            }
        }
    }
    Cpdag::new(names, directed, undirected)
}

/// Applies Meek's rules 1-4 until nothing changes.
pub(crate) fn meek_closure(adj: &[Vec<bool>], dir: &mut [Vec<bool>]) {
    let p = adj.len();
    let und = |dir: &[Vec<bool>], a: usize, b: usize| adj[a][b] && !dir[a][b] && !dir[b][a];
    loop {
        let mut changed = false;
        for a in 0..p {
            for b in 0..p {
                if !und(dir, a, b) {
                    continue;
                }
                let orient = (0..p).any(|c| {
                    // R1: c -> a - b, c and b nonadjacent
                    (dir[c][a] && c != b && !adj[c][b])
                    // R2: a -> c -> b
                    || (dir[a][c] && dir[c][b])
                }) || (0..p).any(|c| {
                    (0..p).any(|d| {
                        c != d
                            // R3: a - c -> b, a - d -> b, c and d nonadjacent
                            && ((und(dir, a, c) && und(dir, a, d) && dir[c][b] && dir[d][b] && !adj[c][d])
                            // R4: c -> d -> b, a adjacent to c and d, b and c nonadjacent
                            || (dir[c][d] && dir[d][b] && adj[a][c] && adj[a][d] && c != b && !adj[b][c]))
                    })
                });
                if orient {
                    dir[a][b] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// CPDAG of the equivalence class of `dag`: its skeleton with v-structures
/// directed, closed under Meek's rules.
pub fn cpdag_of(dag: &Dag) -> Cpdag {
    let p = dag.n_nodes();
    let mut adj = vec![vec![false; p]; p];
    for (a, b) in dag.edges() {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    let mut dir = vec![vec![false; p]; p];
    for b in 0..p {
        let pa = dag.parents(b);
        for (x, &a) in pa.iter().enumerate() {
            for &c in &pa[x + 1..] {
                if !adj[a][c] {
                    dir[a][b] = true;
                    dir[c][b] = true;
                }
            }
        }
    }
    meek_closure(&adj, &mut dir);
    to_cpdag(dag.nodes().to_vec(), &adj, &dir).expect("skeleton pairs are unique")
}

/// A DAG from a CPDAG estimate. Uses a consistent extension when one
/// exists; otherwise keeps the directed edges that fit a random
/// near-topological order and orients everything else along that order.
/// The flag reports whether the fallback was needed.
pub fn complete_to_dag<R: Rng + ?Sized>(cpdag: &Cpdag, rng: &mut R) -> Result<(Dag, bool)> {
    match dag_from_cpdag(cpdag, rng) {
        Ok(d) => return Ok((d, false)),
        Err(Error::NotExtendable(_)) => {}
        Err(e) => return Err(e),
    }
    let p = cpdag.n_nodes();
    let mut indeg = vec![0usize; p];
    for &(_, b) in cpdag.directed() {
        indeg[b] += 1;
    }
    let mut placed = vec![false; p];
    let mut rank = vec![0usize; p];
    let mut nodes: Vec<usize> = (0..p).collect();
    for r in 0..p {
        nodes.shuffle(rng);
        // prefer nodes with no remaining directed parents; break cycles at
        // the node with the fewest
        let x = *nodes
            .iter()
            .filter(|&&v| !placed[v])
            .min_by_key(|&&v| indeg[v])
            .unwrap();
        placed[x] = true;
        rank[x] = r;
        for &(a, b) in cpdag.directed() {
            if a == x && !placed[b] {
                indeg[b] -= 1;
            }
        }
    }
    let edges = cpdag
        .directed()
        .iter()
        .chain(cpdag.undirected())
        .map(|&(a, b)| if rank[a] < rank[b] { (a, b) } else { (b, a) });
    Ok((Dag::new(cpdag.nodes().to_vec(), edges)?, true))
}

#[cfg(test)]
mod tests {
    use super::super::ci::DSepOracle;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn names(p: usize) -> Vec<NodeId> {
        (0..p).map(|i| format!("v{i}")).collect()
    }

    #[test]
    fn subsets_are_enumerated_in_order() {
        let mut seen = Vec::new();
        for_each_subset(&[4, 5, 6, 7], 2, |s| {
            seen.push(s.to_vec());
            Ok(false)
        })
        .unwrap();
        assert_eq!(
            seen,
            vec![vec![4, 5], vec![4, 6], vec![4, 7], vec![5, 6], vec![5, 7], vec![6, 7]]
        );
        let mut count = 0;
        for_each_subset(&[1, 2], 0, |s| {
            assert!(s.is_empty());
            count += 1;
            Ok(false)
        })
        .unwrap();
        assert_eq!(count, 1);
        assert!(!for_each_subset(&[1], 2, |_| Ok(true)).unwrap());
    }

    #[test]
    fn cpdag_examples() {
        let chain = Dag::new(names(3), [(0, 1), (1, 2)]).unwrap();
        let c = cpdag_of(&chain);
        assert!(c.directed().is_empty());
        assert_eq!(c.undirected().len(), 2);

        let collider = Dag::new(names(3), [(0, 2), (1, 2)]).unwrap();
        let c = cpdag_of(&collider);
        assert!(c.has_directed(0, 2) && c.has_directed(1, 2));

        // a->b<-c, b->d: b->d follows by rule 1
        let d = Dag::new(names(4), [(0, 1), (2, 1), (1, 3)]).unwrap();
        let c = cpdag_of(&d);
        assert!(c.has_directed(0, 1) && c.has_directed(2, 1) && c.has_directed(1, 3));
        assert!(c.undirected().is_empty());
    }

    #[test]
    fn oracle_pc_on_small_graphs() {
        for edges in [vec![(0, 2), (1, 2)], vec![(0, 1), (1, 2)]] {
            let dag = Dag::new(names(3), edges).unwrap();
            let got = pc_with_test(&DSepOracle::new(dag.clone()), names(3), None).unwrap();
            assert_eq!(got, cpdag_of(&dag));
        }
    }

    #[test]
    fn fallback_completion_is_acyclic() {
        let c = Cpdag::new(names(4), [], [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (d, fallback) = complete_to_dag(&c, &mut rng).unwrap();
        assert!(fallback);
        assert_eq!(d.n_edges(), 4);
    }
}
