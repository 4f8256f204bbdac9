use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use semisynth::drf::{
    conditional_sample, drf_weights, fit_drf, median_heuristic_bandwidth, mmd_split_score, DistributionalForest,
    DrfConfig, FourierFeatures, Tree,
};

/// Weighted squared MMD with the exact Gaussian kernel.
fn exact_mmd(left: &[f64], right: &[f64], bw: f64) -> f64 {
    let k = |a: f64, b: f64| (-(a - b).powi(2) / (2.0 * bw * bw)).exp();
    let mean = |u: &[f64], v: &[f64]| {
        let mut s = 0.0;
        for &a in u {
            for &b in v {
                s += k(a, b);
            }
        }
        s / (u.len() * v.len()) as f64
    };
    let (nl, nr) = (left.len() as f64, right.len() as f64);
    let n = nl + nr;
    nl * nr / (n * n) * (mean(left, left) + mean(right, right) - 2.0 * mean(left, right))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn fourier_score_approximates_exact_kernel_on_separated_sets() {
    let left = [0.0; 3];
    let right = [10.0; 3];
    let exact = exact_mmd(&left, &right, 1.0);
    let mut total = 0.0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ff = FourierFeatures::draw(50, 1.0, &mut rng);
        let s = mmd_split_score(&left, &right, &ff).unwrap();
        assert!(s > 0.0);
        total += s;
    }
    let avg = total / 100.0;
    assert!(avg >= 0.9 * exact, "{avg} vs exact {exact}");
}

#[test]
fn fourier_and_exact_scores_rank_alike() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let x: Vec<f64> = (0..200).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y: Vec<f64> = x.iter().map(|&v| v.abs() + v + noise.sample(&mut rng)).collect();
    let bw = median_heuristic_bandwidth(&y, 0).unwrap();
    let ff = FourierFeatures::draw(50, bw, &mut rng);
    let (mut exact, mut approx) = (Vec::new(), Vec::new());
    for _ in 0..100 {
        let t = rng.random_range(-1.8..1.8);
        let (l, r): (Vec<f64>, Vec<f64>) = {
            let mut l = Vec::new();
            let mut r = Vec::new();
            for (xi, yi) in x.iter().zip(&y) {
                if *xi <= t { l.push(*yi) } else { r.push(*yi) }
            }
            (l, r)
        };
        exact.push(exact_mmd(&l, &r, bw));
        approx.push(mmd_split_score(&l, &r, &ff).unwrap());
    }
    let rho = pearson(&ranks(&exact), &ranks(&approx));
    assert!(rho > 0.9, "spearman {rho}");
}

#[test]
fn step_response_splits_at_the_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x: Vec<f64> = (0..2000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = x.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
    let cfg = DrfConfig { num_trees: 100, seed: 3, ..DrfConfig::default() };
    let f = fit_drf("y", &y, &[("x", &x)], &cfg).unwrap();
    let near = f
        .trees()
        .iter()
        .filter(|t| t.root_split().is_some_and(|(_, th)| (-0.1..=0.1).contains(&th)))
        .count();
    assert!(near >= 90, "{near}/100");
}

#[test]
fn two_tree_weights_average_leaf_uniforms() {
    let trees = vec![
        Tree::stump(0, 0.0, vec![1, 2], vec![0, 3]),
        Tree::stump(0, 0.5, vec![2, 3], vec![0, 1]),
    ];
    let f = DistributionalForest::from_trees("y".into(), vec!["x".into()], vec![0.0, 1.0, 2.0, 3.0], trees).unwrap();
    // x = -1 lands in {1, 2} and {2, 3}
    let w = drf_weights(&f, &[-1.0]).unwrap();
    assert_eq!(w, vec![0.0, 0.25, 0.5, 0.25]);
}

fn linear_forest(n: usize, trees: usize, seed: u64) -> (Vec<f64>, DistributionalForest) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.2).unwrap();
    let x: Vec<f64> = (0..n).map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng)).collect();
    let y: Vec<f64> = x.iter().map(|&v| v + noise.sample(&mut rng)).collect();
    let cfg = DrfConfig { num_trees: trees, seed, ..DrfConfig::default() };
    let f = fit_drf("y", &y, &[("x", &x)], &cfg).unwrap();
    (x, f)
}

#[test]
fn weights_are_a_distribution_on_co_leaf_rows() {
    let (_, f) = linear_forest(1000, 50, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let q = [rng.random_range(-4.0..4.0)];
        let w = drf_weights(&f, &q).unwrap();
        assert!(w.iter().all(|&v| v >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let mut support = vec![false; w.len()];
        for t in f.trees() {
            for &i in t.leaf_rows(&q) {
                support[i as usize] = true;
            }
        }
        assert!(w.iter().zip(&support).all(|(&v, &s)| (v > 0.0) == s));
    }
}

#[test]
fn sampled_rows_follow_the_weights() {
    let (_, f) = linear_forest(400, 30, 4);
    let q = [0.3];
    let w = drf_weights(&f, &q).unwrap();
    let mut counts = vec![0usize; w.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = 100_000;
    for _ in 0..draws {
        counts[f.sample_row(&q, &mut rng).unwrap()] += 1;
    }
    for (c, p) in counts.iter().zip(&w) {
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        // 4 sigma keeps the family-wise error small over ~400 rows
        assert!((*c as f64 - mean).abs() <= 4.0 * sd + 1e-9, "count {c}, expected {mean}");
    }
}

#[test]
fn point_mass_forest_always_returns_that_value() {
    let f = DistributionalForest::from_trees(
        "y".into(),
        vec!["x".into()],
        (0..10).map(f64::from).collect(),
        vec![Tree::leaf(vec![7])],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        assert_eq!(conditional_sample(&f, &[1.0], &mut rng).unwrap(), 7.0);
    }
}

#[test]
fn conditional_mean_tracks_linear_signal() {
    let (_, f) = linear_forest(5000, 500, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let draws: Vec<f64> = (0..10_000).map(|_| conditional_sample(&f, &[0.5], &mut rng).unwrap()).collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    assert!((mean - 0.5).abs() <= 0.15, "{mean}");
}

#[test]
fn independent_response_gives_marginal_conditionals() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 5000;
    let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let y: Vec<f64> = (0..n).map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng)).collect();
    let cfg = DrfConfig { num_trees: 1000, seed: 2, ..DrfConfig::default() };
    let f = fit_drf("y", &y, &[("x", &x)], &cfg).unwrap();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut total = 0.0;
    for q in 0..20 {
        let w = drf_weights(&f, &[(q as f64 + 0.5) / 20.0]).unwrap();
        let (mut cw, mut ks) = (0.0, 0.0f64);
        for (rank, &i) in order.iter().enumerate() {
            cw += w[i];
            ks = ks.max((cw - (rank + 1) as f64 / n as f64).abs());
        }
        total += ks;
    }
    assert!(total / 20.0 < 0.1, "mean KS {}", total / 20.0);
}

#[test]
fn defaults_match_reference_settings() {
    let c = DrfConfig::default();
    assert_eq!((c.num_trees, c.min_node_size), (2000, 15));
    assert!(c.validate().is_ok());
    assert!(DrfConfig { min_node_size: 1, ..c.clone() }.validate().is_err());
    assert!(DrfConfig { subsample_fraction: 0.0, ..c }.validate().is_err());
}
