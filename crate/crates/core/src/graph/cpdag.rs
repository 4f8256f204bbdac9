use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Dag, NodeId};
use crate::error::{Error, Result};

/// Completed partially directed acyclic graph: a Markov equivalence class.
/// Undirected pairs are stored with the smaller index first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cpdag {
    nodes: Vec<NodeId>,
    directed: BTreeSet<(usize, usize)>,
    undirected: BTreeSet<(usize, usize)>,
}

impl Cpdag {
    pub fn new(
        nodes: Vec<NodeId>,
        directed: impl IntoIterator<Item = (usize, usize)>,
        undirected: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let p = nodes.len();
        let mut pairs = BTreeSet::new();
        let mut d = BTreeSet::new();
        for (a, b) in directed {
            if a >= p || b >= p || a == b {
                return Err(Error::Input(format!("invalid directed edge ({a}, {b})")));
            }
            if !pairs.insert((a.min(b), a.max(b))) {
                return Err(Error::Input(format!(
                    "pair ({}, {}) appears twice",
                    nodes[a], nodes[b]
                )));
            }
            d.insert((a, b));
        }
        let mut u = BTreeSet::new();
        for (a, b) in undirected {
            if a >= p || b >= p || a == b {
                return Err(Error::Input(format!("invalid undirected edge ({a}, {b})")));
            }
            let key = (a.min(b), a.max(b));
            if !pairs.insert(key) {
                return Err(Error::Input(format!(
                    "pair ({}, {}) appears twice",
                    nodes[a], nodes[b]
                )));
            }
            u.insert(key);
        }
        Ok(Self {
            nodes,
            directed: d,
            undirected: u,
        })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn directed(&self) -> &BTreeSet<(usize, usize)> {
        &self.directed
    }

    pub fn undirected(&self) -> &BTreeSet<(usize, usize)> {
        &self.undirected
    }

    pub fn has_directed(&self, a: usize, b: usize) -> bool {
        self.directed.contains(&(a, b))
    }

    pub fn has_undirected(&self, a: usize, b: usize) -> bool {
        self.undirected.contains(&(a.min(b), a.max(b)))
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_directed(a, b) || self.has_directed(b, a) || self.has_undirected(a, b)
    }
}

/// Picks a DAG from the equivalence class by repeatedly removing a node that
/// is a sink among the remaining directed edges and whose undirected
/// neighbours are adjacent to all its other neighbours, orienting its
/// undirected edges into it. The removable node is chosen at random among the
/// admissible ones, so every class member is reachable, though not
/// necessarily with equal probability.
pub fn dag_from_cpdag<R: Rng + ?Sized>(cpdag: &Cpdag, rng: &mut R) -> Result<Dag> {
    let p = cpdag.n_nodes();
    // adjacency among remaining nodes: 0 none, 1 directed a->b, 2 directed b->a, 3 undirected
    let mut kind = vec![vec![0u8; p]; p];
    for &(a, b) in &cpdag.directed {
        kind[a][b] = 1;
        kind[b][a] = 2;
    }
    for &(a, b) in &cpdag.undirected {
        kind[a][b] = 3;
        kind[b][a] = 3;
    }
    let mut alive = vec![true; p];
    let mut edges: Vec<(usize, usize)> = cpdag.directed.iter().copied().collect();
    let mut order: Vec<usize> = (0..p).collect();

    for _ in 0..p {
        order.shuffle(rng);
        let pick = order.iter().copied().find(|&x| {
            if !alive[x] {
                return false;
            }
            let nbrs: Vec<usize> = (0..p).filter(|&y| alive[y] && kind[x][y] != 0).collect();
            if nbrs.iter().any(|&y| kind[x][y] == 1) {
                return false;
            }
            nbrs.iter().filter(|&&y| kind[x][y] == 3).all(|&y| {
                nbrs.iter().all(|&z| z == y || kind[y][z] != 0)
            })
        });
        let Some(x) = pick else {
            let rest: Vec<&str> = (0..p)
                .filter(|&i| alive[i])
                .map(|i| cpdag.nodes[i].as_str())
                .collect();
            return Err(Error::NotExtendable(format!(
                "no admissible sink among {{{}}}",
                rest.join(", ")
            )));
        };
        for y in 0..p {
            if alive[y] && kind[x][y] == 3 {
                edges.push((y, x));
            }
        }
        alive[x] = false;
    }
    Dag::new(cpdag.nodes.clone(), edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nodes(n: usize) -> Vec<NodeId> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    #[test]
    fn directed_only_is_identity() {
        let c = Cpdag::new(nodes(3), [(0, 2), (1, 2)], []).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = dag_from_cpdag(&c, &mut rng).unwrap();
        assert_eq!(d.edges(), vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn single_undirected_edge_reaches_both_orientations() {
        let c = Cpdag::new(nodes(2), [], [(0, 1)]).unwrap();
        let mut seen = BTreeSet::new();
        for seed in 0..64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            seen.insert(dag_from_cpdag(&c, &mut rng).unwrap().edges());
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn chain_never_becomes_collider() {
        // The three v-structure-free orientations of a-b-c, found by
        // enumerating all four orientations and discarding a->b<-c.
        let allowed: BTreeSet<Vec<(usize, usize)>> = [
            vec![(0, 1), (1, 2)],
            vec![(1, 0), (2, 1)],
            vec![(1, 0), (1, 2)],
        ]
        .into_iter()
        .map(|mut v| {
            v.sort();
            v
        })
        .collect();
        let c = Cpdag::new(nodes(3), [], [(0, 1), (1, 2)]).unwrap();
        let mut seen = BTreeSet::new();
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = dag_from_cpdag(&c, &mut rng).unwrap().edges();
            assert!(allowed.contains(&e), "{e:?}");
            seen.insert(e);
        }
        assert_eq!(seen, allowed);
    }

    #[test]
    fn non_extendable_rejected() {
        // undirected 4-cycle without chord has no consistent extension
        let c = Cpdag::new(nodes(4), [], [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            dag_from_cpdag(&c, &mut rng),
            Err(Error::NotExtendable(_))
        ));
    }

    #[test]
    fn duplicate_pairs_rejected() {
        assert!(Cpdag::new(nodes(2), [(0, 1)], [(0, 1)]).is_err());
        assert!(Cpdag::new(nodes(2), [(0, 1), (1, 0)], []).is_err());
    }
}
