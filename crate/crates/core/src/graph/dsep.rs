use std::collections::VecDeque;

use super::Dag;
use crate::error::{Error, Result};

/// d-separation of node sets `a` and `b` given `s`, by reachability over
/// (node, direction) states ("Bayes ball").
pub fn d_separated(dag: &Dag, a: &[&str], b: &[&str], s: &[&str]) -> Result<bool> {
    let resolve = |set: &[&str]| -> Result<Vec<usize>> {
        set.iter().map(|n| dag.index_of(n)).collect()
    };
    let (a, b, s) = (resolve(a)?, resolve(b)?, resolve(s)?);
    let p = dag.n_nodes();
    let mut tag = vec![0u8; p];
    for (bit, set) in [(1u8, &a), (2, &b), (4, &s)] {
        for &i in set.iter() {
            if tag[i] & !bit != 0 {
                return Err(Error::Input(format!(
                    "node `{}` appears in more than one of the sets",
                    dag.node(i)
                )));
            }
            tag[i] |= bit;
        }
    }
    Ok(d_separated_idx(dag, &a, &b, &s))
}

pub(crate) fn d_separated_idx(dag: &Dag, a: &[usize], b: &[usize], s: &[usize]) -> bool {
    let p = dag.n_nodes();
    let mut in_s = vec![false; p];
    for &i in s {
        in_s[i] = true;
    }
    let anc_s = dag.ancestral_closure(s);
    let mut target = vec![false; p];
    for &i in b {
        target[i] = true;
    }

    // visited[v][0]: arrived from a child (moving up); [1]: from a parent.
    let mut visited = vec![[false; 2]; p];
    let mut queue: VecDeque<(usize, usize)> = a.iter().map(|&x| (x, 0)).collect();
    while let Some((v, dir)) = queue.pop_front() {
        if visited[v][dir] {
            continue;
        }
        visited[v][dir] = true;
        if !in_s[v] && target[v] {
            return false;
        }
        if dir == 0 {
            if !in_s[v] {
                queue.extend(dag.parents(v).iter().map(|&u| (u, 0)));
                queue.extend(dag.children(v).iter().map(|&c| (c, 1)));
            }
        } else {
            if !in_s[v] {
                queue.extend(dag.children(v).iter().map(|&c| (c, 1)));
            }
            if anc_s[v] {
                queue.extend(dag.parents(v).iter().map(|&u| (u, 0)));
            }
        }
    }
    true
}
