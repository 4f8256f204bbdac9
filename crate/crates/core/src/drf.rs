//! Distributional random forests.
//!
//! Trees are grown on row subsamples with splits chosen by a two-sample MMD
//! statistic of the response, approximated with random Fourier features of a
//! Gaussian kernel. A query point induces weights over training rows (the
//! average over trees of the uniform distribution on its leaf), and the
//! conditional distribution estimate puts those weights on the training
//! responses.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::graph::NodeId;

const LEAF: u32 = u32::MAX;
const MAX_THRESHOLDS: usize = 20;
const BANDWIDTH_CAP: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrfConfig {
    pub num_trees: usize,
    pub min_node_size: usize,
    pub num_fourier_features: usize,
    /// Predictors tried per split; `None` means ceil(sqrt(#predictors)).
    pub mtry: Option<usize>,
    pub subsample_fraction: f64,
    /// Grow each tree on half of its subsample and fill the leaves with the
    /// other half.
    pub honesty: bool,
    /// Kernel bandwidth; `None` selects it by the median heuristic.
    pub bandwidth: Option<f64>,
    /// Standard deviation of Gaussian noise added to conditional draws.
    /// Off by default so draws are exact training values.
    pub jitter: Option<f64>,
    pub seed: u64,
}

impl Default for DrfConfig {
    fn default() -> Self {
        Self {
            num_trees: 2000,
            min_node_size: 15,
            num_fourier_features: 50,
            mtry: None,
            subsample_fraction: 0.5,
            honesty: true,
            bandwidth: None,
            jitter: None,
            seed: 0,
        }
    }
}

impl DrfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::Input("num_trees must be >= 1".into()));
        }
        if self.min_node_size < 2 {
            return Err(Error::Input("min_node_size must be >= 2".into()));
        }
        if self.num_fourier_features == 0 {
            return Err(Error::Input("num_fourier_features must be >= 1".into()));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(Error::Input(format!(
                "subsample_fraction must lie in (0, 1], got {}",
                self.subsample_fraction
            )));
        }
        if let Some(b) = self.bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Input(format!("bandwidth must be positive, got {b}")));
            }
        }
        if let Some(j) = self.jitter {
            if !(j >= 0.0 && j.is_finite()) {
                return Err(Error::Input(format!("jitter must be >= 0, got {j}")));
            }
        }
        Ok(())
    }
}

/// Median of pairwise absolute differences, over a seeded subsample of at
/// most 1000 values. Falls back to the median of the positive differences
/// when ties make the plain median zero.
pub fn median_heuristic_bandwidth(response: &[f64], seed: u64) -> Result<f64> {
    if response.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("response contains non-finite values".into()));
    }
    if response.len() < 2 || response.iter().all(|&v| v == response[0]) {
        return Err(Error::Degenerate("response has no spread for a kernel bandwidth".into()));
    }
    let values: Vec<f64> = if response.len() > BANDWIDTH_CAP {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_indices(&mut rng, response.len(), BANDWIDTH_CAP)
            .into_iter()
            .map(|i| response[i])
            .collect()
    } else {
        response.to_vec()
    };
    let mut diffs = Vec::with_capacity(values.len() * (values.len() - 1) / 2);
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            diffs.push((values[i] - values[j]).abs());
        }
    }
    let m = median(&mut diffs);
    if m > 0.0 {
        return Ok(m);
    }
    let mut positive: Vec<f64> = diffs.into_iter().filter(|&d| d > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::Degenerate("response subsample has no spread".into()));
    }
    Ok(median(&mut positive))
}

fn median(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Frequencies of a random Fourier feature map for a Gaussian kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierFeatures {
    omegas: Vec<f64>,
}

impl FourierFeatures {
    /// Draws `count` frequencies from N(0, 1 / bandwidth^2).
    pub fn draw<R: Rng + ?Sized>(count: usize, bandwidth: f64, rng: &mut R) -> Self {
        let omegas = (0..count)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z / bandwidth
            })
            .collect();
        Self { omegas }
    }

    pub fn from_frequencies(omegas: Vec<f64>) -> Self {
        Self { omegas }
    }

    pub fn dim(&self) -> usize {
        2 * self.omegas.len()
    }

    /// Writes `[cos(w y), sin(w y)] / sqrt(B)` into `out`.
    pub fn map_into(&self, y: f64, out: &mut [f64]) {
        let b = self.omegas.len();
        let s = 1.0 / (b as f64).sqrt();
        for (k, w) in self.omegas.iter().enumerate() {
            let (sin, cos) = (w * y).sin_cos();
            out[k] = cos * s;
            out[b + k] = sin * s;
        }
    }

    fn mean_map(&self, ys: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim()];
        let mut buf = vec![0.0; self.dim()];
        for &y in ys {
            self.map_into(y, &mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b;
            }
        }
        let n = ys.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

/// `(n_L n_R / n^2) * ||mean_L phi - mean_R phi||^2`.
pub fn mmd_split_score(left: &[f64], right: &[f64], features: &FourierFeatures) -> Result<f64> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::Input("both children of a split must be nonempty".into()));
    }
    let ml = features.mean_map(left);
    let mr = features.mean_map(right);
    let (nl, nr) = (left.len() as f64, right.len() as f64);
    let n = nl + nr;
    Ok(weighted_distance(nl, nr, n, &ml, &mr))
}

fn weighted_distance(nl: f64, nr: f64, n: f64, ml: &[f64], mr: &[f64]) -> f64 {
    let d: f64 = ml.iter().zip(mr).map(|(a, b)| (a - b) * (a - b)).sum();
    nl * nr / (n * n) * d
}

/// One tree in flat storage. Internal node `i` sends `x[feature[i]] <=
/// threshold[i]` to `left[i]`, else to `right[i]`. For a leaf,
/// `feature[i] == u32::MAX` and `rows[left[i]..right[i]]` are its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    feature: Vec<u32>,
    threshold: Vec<f64>,
    left: Vec<u32>,
    right: Vec<u32>,
    rows: Vec<u32>,
}

impl Tree {
    /// A tree with a single leaf.
    pub fn leaf(rows: Vec<u32>) -> Self {
        let n = rows.len() as u32;
        Self {
            feature: vec![LEAF],
            threshold: vec![0.0],
            left: vec![0],
            right: vec![n],
            rows,
        }
    }

    /// A single split on `feature` at `threshold` with two leaves.
    pub fn stump(feature: usize, threshold: f64, left_rows: Vec<u32>, right_rows: Vec<u32>) -> Self {
        let nl = left_rows.len() as u32;
        let nr = right_rows.len() as u32;
        let mut rows = left_rows;
        rows.extend(right_rows);
        Self {
            feature: vec![feature as u32, LEAF, LEAF],
            threshold: vec![threshold, 0.0, 0.0],
            left: vec![1, 0, nl],
            right: vec![2, nl, nl + nr],
            rows,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.feature.iter().filter(|&&f| f == LEAF).count()
    }

    /// Split of the root, if it is not a leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        (self.feature[0] != LEAF).then(|| (self.feature[0] as usize, self.threshold[0]))
    }

    /// Training rows of the leaf reached by `x`.
    pub fn leaf_rows(&self, x: &[f64]) -> &[u32] {
        let mut i = 0usize;
        while self.feature[i] != LEAF {
            let f = self.feature[i] as usize;
            i = if x[f] <= self.threshold[i] {
                self.left[i] as usize
            } else {
                self.right[i] as usize
            };
        }
        &self.rows[self.left[i] as usize..self.right[i] as usize]
    }

    /// All leaves as row slices.
    pub fn leaves(&self) -> impl Iterator<Item = &[u32]> {
        (0..self.n_nodes())
            .filter(|&i| self.feature[i] == LEAF)
            .map(|i| &self.rows[self.left[i] as usize..self.right[i] as usize])
    }

    fn check(&self, n_rows: usize, n_features: usize) -> Result<()> {
        let m = self.n_nodes();
        let bad = |msg: &str| Err(Error::Format(format!("tree: {msg}")));
        if m == 0 || self.threshold.len() != m || self.left.len() != m || self.right.len() != m {
            return bad("inconsistent array lengths");
        }
        for i in 0..m {
            if self.feature[i] == LEAF {
                let (a, b) = (self.left[i] as usize, self.right[i] as usize);
                if a >= b || b > self.rows.len() {
                    return bad("leaf row range out of bounds or empty");
                }
            } else {
                if self.feature[i] as usize >= n_features {
                    return bad("split feature out of range");
                }
                // children are always created after their parent
                let (l, r) = (self.left[i] as usize, self.right[i] as usize);
                if l <= i || r <= i || l >= m || r >= m {
                    return bad("child index out of range");
                }
            }
        }
        if self.rows.iter().any(|&r| r as usize >= n_rows) {
            return bad("leaf row index out of range");
        }
        Ok(())
    }

    fn encode(&self, e: &mut Encoder) {
        e.u32s(&self.feature);
        e.f64s(&self.threshold);
        e.u32s(&self.left);
        e.u32s(&self.right);
        e.u32s(&self.rows);
    }

    fn decode(d: &mut Decoder) -> Result<Self> {
        Ok(Self {
            feature: d.u32s()?,
            threshold: d.f64s()?,
            left: d.u32s()?,
            right: d.u32s()?,
            rows: d.u32s()?,
        })
    }
}

/// Conditional distribution estimate of one node given its parents.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionalForest {
    target: NodeId,
    predictors: Vec<NodeId>,
    trees: Vec<Tree>,
    response: Vec<f64>,
    bandwidth: f64,
    jitter: Option<f64>,
}

impl DistributionalForest {
    /// Assembles a forest from prebuilt trees.
    pub fn from_trees(
        target: NodeId,
        predictors: Vec<NodeId>,
        response: Vec<f64>,
        trees: Vec<Tree>,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::Input("a forest needs at least one tree".into()));
        }
        for t in &trees {
            t.check(response.len(), predictors.len())
                .map_err(|e| Error::Input(e.to_string()))?;
        }
        Ok(Self {
            target,
            predictors,
            trees,
            response,
            bandwidth: 1.0,
            jitter: None,
        })
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn predictors(&self) -> &[NodeId] {
        &self.predictors
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    fn check_query(&self, query: &[f64]) -> Result<()> {
        if query.len() != self.predictors.len() {
            return Err(Error::Input(format!(
                "forest for `{}` expects {} predictor values ({}), got {}",
                self.target,
                self.predictors.len(),
                self.predictors.join(", "),
                query.len()
            )));
        }
        if query.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite query for `{}`", self.target)));
        }
        Ok(())
    }

    pub(crate) fn encode(&self, e: &mut Encoder) {
        e.str(&self.target);
        e.len(self.predictors.len());
        for p in &self.predictors {
            e.str(p);
        }
        e.f64s(&self.response);
        e.f64(self.bandwidth);
        e.f64(self.jitter.unwrap_or(-1.0));
        e.len(self.trees.len());
        for t in &self.trees {
            t.encode(e);
        }
    }

    pub(crate) fn decode(d: &mut Decoder) -> Result<Self> {
        let target = d.string()?;
        let np = d.len(8)?;
        let predictors = (0..np).map(|_| d.string()).collect::<Result<Vec<_>>>()?;
        let response = d.f64s()?;
        let bandwidth = d.f64()?;
        let jitter = d.f64()?;
        let nt = d.len(40)?;
        let trees = (0..nt).map(|_| Tree::decode(d)).collect::<Result<Vec<_>>>()?;
        if trees.is_empty() {
            return Err(Error::Format(format!("forest for `{target}` has no trees")));
        }
        for t in &trees {
            t.check(response.len(), predictors.len())?;
        }
        Ok(Self {
            target,
            predictors,
            trees,
            response,
            bandwidth,
            jitter: (jitter >= 0.0).then_some(jitter),
        })
    }
}

/// Fits a forest for `response` given `predictors` (name, column) pairs.
pub fn fit_drf(
    target: &str,
    response: &[f64],
    predictors: &[(&str, &[f64])],
    config: &DrfConfig,
) -> Result<DistributionalForest> {
    config.validate()?;
    if predictors.is_empty() {
        return Err(Error::Input(format!("forest for `{target}` needs at least one predictor")));
    }
    let n = response.len();
    if n < 2 * config.min_node_size {
        return Err(Error::Input(format!(
            "forest for `{target}` needs at least {} rows, got {n}",
            2 * config.min_node_size
        )));
    }
    if n > u32::MAX as usize {
        return Err(Error::Input("too many rows for a forest".into()));
    }
    for (name, col) in predictors {
        if col.len() != n {
            return Err(Error::Input(format!("predictor `{name}` has {} rows, response has {n}", col.len())));
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("predictor `{name}` contains non-finite values")));
        }
    }
    let bandwidth = match config.bandwidth {
        Some(b) => b,
        None => median_heuristic_bandwidth(response, config.seed)?,
    };
    let cols: Vec<&[f64]> = predictors.iter().map(|(_, c)| *c).collect();
    let grower = Grower {
        response,
        cols: &cols,
        cfg: config,
        bandwidth,
        mtry: config
            .mtry
            .unwrap_or_else(|| (cols.len() as f64).sqrt().ceil() as usize)
            .clamp(1, cols.len()),
    };
    let trees: Vec<Tree> = (0..config.num_trees)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(j as u64);
            grower.grow(&mut rng)
        })
        .collect();
    Ok(DistributionalForest {
        target: target.to_string(),
        predictors: predictors.iter().map(|(n, _)| n.to_string()).collect(),
        trees,
        response: response.to_vec(),
        bandwidth,
        jitter: config.jitter,
    })
}

struct Grower<'a> {
    response: &'a [f64],
    cols: &'a [&'a [f64]],
    cfg: &'a DrfConfig,
    bandwidth: f64,
    mtry: usize,
}

enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(Vec<u32>),
}

/// Lays out `nodes` in pre-order, dropping splits that lead to an empty
/// leaf: such a split is replaced by its other child.
fn flatten(nodes: &[Node]) -> Tree {
    let mut count = vec![0usize; nodes.len()];
    // children always have larger indices than their parent
    for k in (0..nodes.len()).rev() {
        count[k] = match &nodes[k] {
            Node::Leaf(rows) => rows.len(),
            Node::Split { left, right, .. } => count[*left] + count[*right],
        };
    }
    let mut tree = Tree {
        feature: Vec::new(),
        threshold: Vec::new(),
        left: Vec::new(),
        right: Vec::new(),
        rows: Vec::with_capacity(count[0]),
    };
    fn emit(nodes: &[Node], count: &[usize], mut k: usize, tree: &mut Tree) -> u32 {
        loop {
            match &nodes[k] {
                Node::Split { left, right, .. } if count[*left] == 0 => k = *right,
                Node::Split { left, right, .. } if count[*right] == 0 => k = *left,
                _ => break,
            }
        }
        let slot = tree.feature.len();
        tree.feature.push(LEAF);
        tree.threshold.push(0.0);
        tree.left.push(0);
        tree.right.push(0);
        match &nodes[k] {
            Node::Leaf(rows) => {
                tree.left[slot] = tree.rows.len() as u32;
                tree.rows.extend_from_slice(rows);
                tree.right[slot] = tree.rows.len() as u32;
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                tree.feature[slot] = *feature as u32;
                tree.threshold[slot] = *threshold;
                let l = emit(nodes, count, *left, tree);
                let r = emit(nodes, count, *right, tree);
                tree.left[slot] = l;
                tree.right[slot] = r;
            }
        }
        slot as u32
    }
    emit(nodes, &count, 0, &mut tree);
    tree
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Grower<'_> {
    fn grow(&self, rng: &mut ChaCha8Rng) -> Tree {
        let n = self.response.len();
        let m = ((self.cfg.subsample_fraction * n as f64).round() as usize).clamp(1, n);
        let mut sub: Vec<u32> = sample_indices(rng, n, m).into_iter().map(|i| i as u32).collect();
        // The subsample comes in random order, so its halves are random too.
        let honest = if self.cfg.honesty && m >= 2 {
            let mut h = sub.split_off(m.div_ceil(2));
            h.sort_unstable();
            Some(h)
        } else {
            None
        };
        sub.sort_unstable();

        // Grow on the structure rows.
        let mut nodes = vec![Node::Leaf(Vec::new())];
        let mut stack = vec![(0usize, sub)];
        while let Some((node, rows)) = stack.pop() {
            match self.best_split(&rows, rng) {
                Some(s) => {
                    let col = self.cols[s.feature];
                    let (l, r): (Vec<u32>, Vec<u32>) =
                        rows.into_iter().partition(|&i| col[i as usize] <= s.threshold);
                    let li = nodes.len();
                    nodes.push(Node::Leaf(Vec::new()));
                    nodes.push(Node::Leaf(Vec::new()));
                    nodes[node] = Node::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left: li,
                        right: li + 1,
                    };
                    stack.push((li + 1, r));
                    stack.push((li, l));
                }
                None => nodes[node] = Node::Leaf(rows),
            }
        }

        // Repopulate the leaves with the held-out rows.
        if let Some(h) = honest {
            for node in nodes.iter_mut() {
                if let Node::Leaf(rows) = node {
                    rows.clear();
                }
            }
            for i in h {
                let mut k = 0;
                while let Node::Split { feature, threshold, left, right } = nodes[k] {
                    k = if self.cols[feature][i as usize] <= threshold { left } else { right };
                }
                if let Node::Leaf(rows) = &mut nodes[k] {
                    rows.push(i);
                }
            }
        }
        flatten(&nodes)
    }

    fn best_split(&self, rows: &[u32], rng: &mut ChaCha8Rng) -> Option<Split> {
        let len = rows.len();
        let min = self.cfg.min_node_size;
        if len < 2 * min {
            return None;
        }
        let ff = FourierFeatures::draw(self.cfg.num_fourier_features, self.bandwidth, rng);
        let dim = ff.dim();
        let mut phi = vec![0.0; len * dim];
        let mut total = vec![0.0; dim];
        for (k, &i) in rows.iter().enumerate() {
            let out = &mut phi[k * dim..(k + 1) * dim];
            ff.map_into(self.response[i as usize], out);
            for (t, v) in total.iter_mut().zip(out.iter()) {
                *t += v;
            }
        }
        let features = sample_indices(rng, self.cols.len(), self.mtry).into_vec();

        let mut best: Option<Split> = None;
        let mut order: Vec<usize> = (0..len).collect();
        let mut acc = vec![0.0; dim];
        let n = len as f64;
        for f in features {
            let col = self.cols[f];
            let x = |k: usize| col[rows[k] as usize];
            order.sort_by(|&a, &b| x(a).total_cmp(&x(b)));
            if x(order[0]) == x(order[len - 1]) {
                continue;
            }
            let mut cands: Vec<usize> = (1..=MAX_THRESHOLDS)
                .map(|j| j * len / (MAX_THRESHOLDS + 1))
                .filter(|&p| p >= min && len - p >= min && x(order[p - 1]) < x(order[p]))
                .collect();
            cands.dedup();
            if cands.is_empty() {
                continue;
            }
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut next = 0;
            for (pos, &k) in order.iter().enumerate() {
                for (a, v) in acc.iter_mut().zip(&phi[k * dim..(k + 1) * dim]) {
                    *a += v;
                }
                if pos + 1 == cands[next] {
                    let nl = (pos + 1) as f64;
                    let nr = n - nl;
                    let d: f64 = acc
                        .iter()
                        .zip(&total)
                        .map(|(a, t)| {
                            let diff = a / nl - (t - a) / nr;
                            diff * diff
                        })
                        .sum();
                    let score = nl * nr / (n * n) * d;
                    if score > 1e-14 && best.as_ref().is_none_or(|b| score > b.score) {
                        best = Some(Split {
                            feature: f,
                            threshold: 0.5 * (x(k) + x(order[pos + 1])),
                            score,
                        });
                    }
                    next += 1;
                    if next == cands.len() {
                        break;
                    }
                }
            }
        }
        best
    }
}

/// Weight of every training row at `query`: the average over trees of the
/// uniform distribution on the rows of the leaf `query` falls into.
pub fn drf_weights(forest: &DistributionalForest, query: &[f64]) -> Result<Vec<f64>> {
    forest.check_query(query)?;
    let mut w = vec![0.0; forest.response.len()];
    let per_tree = 1.0 / forest.trees.len() as f64;
    for t in &forest.trees {
        let leaf = t.leaf_rows(query);
        let share = per_tree / leaf.len() as f64;
        for &i in leaf {
            w[i as usize] += share;
        }
    }
    Ok(w)
}

/// Draws one value from the conditional distribution estimate at `query`.
/// A uniform tree followed by a uniform row of its leaf picks row `i` with
/// probability exactly equal to its weight.
pub fn conditional_sample<R: Rng + ?Sized>(forest: &DistributionalForest, query: &[f64], rng: &mut R) -> Result<f64> {
    forest.check_query(query)?;
    Ok(forest.sample_unchecked(query, rng))
}

impl DistributionalForest {
    pub(crate) fn sample_unchecked<R: Rng + ?Sized>(&self, query: &[f64], rng: &mut R) -> f64 {
        let t = &self.trees[rng.random_range(0..self.trees.len())];
        let leaf = t.leaf_rows(query);
        let i = leaf[rng.random_range(0..leaf.len())] as usize;
        let y = self.response[i];
        match self.jitter {
            Some(s) if s > 0.0 => {
                let z: f64 = StandardNormal.sample(rng);
                y + s * z
            }
            _ => y,
        }
    }

    /// Row drawn by the two-stage procedure, for tests of the sampling law.
    pub fn sample_row<R: Rng + ?Sized>(&self, query: &[f64], rng: &mut R) -> Result<usize> {
        self.check_query(query)?;
        let t = &self.trees[rng.random_range(0..self.trees.len())];
        let leaf = t.leaf_rows(query);
        Ok(leaf[rng.random_range(0..leaf.len())] as usize)
    }
}
