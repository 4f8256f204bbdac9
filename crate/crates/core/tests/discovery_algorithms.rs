use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use semisynth::data::DatasetTable;
use semisynth::discovery::{
    cpdag_of, direct_lingam, notears_linear, pc_stable, pc_with_test, sortnregress, Algorithm, DSepOracle,
    NotearsConfig, PcConfig,
};
use semisynth::graph::Dag;
use semisynth::metrics::shd;

fn names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("x{i}")).collect()
}

fn random_dag(p: usize, prob: f64, rng: &mut ChaCha8Rng) -> Dag {
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(rng);
    let mut edges = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            if rng.random::<f64>() < prob {
                edges.push((perm[a], perm[b]));
            }
        }
    }
    Dag::new(names(p), edges).unwrap()
}

/// Linear SEM sample; `weights[(a, b)]` on each edge, noise from `noise`.
fn simulate(dag: &Dag, weight: impl Fn(usize, usize) -> f64, n: usize, rng: &mut ChaCha8Rng, noise: &dyn Fn(&mut ChaCha8Rng, usize) -> f64) -> DatasetTable {
    let p = dag.n_nodes();
    let mut cols = vec![vec![0.0; n]; p];
    for v in dag.topological_order() {
        for r in 0..n {
            let mut x = noise(rng, v);
            for &u in dag.parents(v) {
                x += weight(u, v) * cols[u][r];
            }
            cols[v][r] = x;
        }
    }
    DatasetTable::new(dag.nodes().to_vec(), cols).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng, _: usize) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sample(rng)
}

fn uniform(rng: &mut ChaCha8Rng, _: usize) -> f64 {
    Uniform::new(-1.0, 1.0).unwrap().sample(rng)
}

#[test]
fn oracle_pc_recovers_the_equivalence_class() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let dag = random_dag(5, 0.5, &mut rng);
        let got = pc_with_test(&DSepOracle::new(dag.clone()), names(5), None).unwrap();
        assert_eq!(got, cpdag_of(&dag), "{:?}", dag.edges());
    }
}

#[test]
fn pc_ignores_column_order() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = random_dag(6, 0.4, &mut rng);
        let data = simulate(&dag, |_, _| 0.8, 500, &mut rng, &gaussian);
        let base = pc_stable(&data, &PcConfig::default()).unwrap();
        for _ in 0..3 {
            let mut order = data.names().to_vec();
            order.shuffle(&mut rng);
            let perm = pc_stable(&data.select(&order).unwrap(), &PcConfig::default()).unwrap();
            let named = |c: &semisynth::graph::Cpdag| {
                let n = c.nodes();
                let mut d: Vec<_> = c.directed().iter().map(|&(a, b)| (n[a].clone(), n[b].clone())).collect();
                let mut u: Vec<_> = c
                    .undirected()
                    .iter()
                    .map(|&(a, b)| if n[a] < n[b] { (n[a].clone(), n[b].clone()) } else { (n[b].clone(), n[a].clone()) })
                    .collect();
                d.sort();
                u.sort();
                (d, u)
            };
            assert_eq!(named(&base), named(&perm));
        }
    }
}

#[test]
fn lingam_orders_two_variables() {
    let mut hits = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = Dag::new(names(2), [(0, 1)]).unwrap();
        let data = simulate(&dag, |_, _| 1.0, 5000, &mut rng, &uniform);
        let g = direct_lingam(&data).unwrap();
        if g.has_edge(0, 1) {
            hits += 1;
        }
    }
    assert!(hits >= 98, "{hits}/100");
}

#[test]
fn lingam_recovers_a_chain() {
    let truth = Dag::new(names(3), [(0, 1), (1, 2)]).unwrap();
    let mut hits = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let data = simulate(&truth, |_, _| 1.0, 5000, &mut rng, &uniform);
        if shd(&truth, &direct_lingam(&data).unwrap()).unwrap() == 0 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn lingam_on_gaussian_data_is_a_dag() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let truth = random_dag(5, 0.5, &mut rng);
    let data = simulate(&truth, |_, _| 0.9, 1000, &mut rng, &gaussian);
    let g = direct_lingam(&data).unwrap();
    assert_eq!(g.topological_order().len(), 5);
}

#[test]
fn notears_on_raw_scale() {
    let mut hits = 0;
    let cfg = NotearsConfig::default();
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let truth = random_dag(5, 0.5, &mut rng);
        let signs: Vec<f64> = (0..25)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 } * rng.random_range(0.5..2.0))
            .collect();
        let data = simulate(&truth, |a, b| signs[a * 5 + b], 1000, &mut rng, &gaussian);
        let w = notears_linear(&data, &cfg).unwrap();
        if w.converged {
            assert!(w.h <= cfg.h_tol);
        }
        if shd(&truth, &w.dag().unwrap()).unwrap() <= 1 {
            hits += 1;
        }
    }
    assert!(hits >= 80, "{hits}/100");
}

#[test]
fn sortnregress_recovers_increasing_variance_chain() {
    let truth = Dag::new(names(4), [(0, 1), (1, 2), (2, 3)]).unwrap();
    let mut hits = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let data = simulate(&truth, |_, _| 1.0, 5000, &mut rng, &gaussian);
        if shd(&truth, &sortnregress(&data).unwrap()).unwrap() == 0 {
            hits += 1;
        }
    }
    assert!(hits >= 90, "{hits}/100");
}

#[test]
fn sortnregress_on_standardized_data_is_a_dag() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let truth = random_dag(6, 0.5, &mut rng);
    let data = simulate(&truth, |_, _| 1.0, 800, &mut rng, &gaussian).standardized();
    let g = sortnregress(&data).unwrap();
    assert_eq!(g.topological_order().len(), 6);
}

#[test]
fn registry_keys_round_trip() {
    for a in Algorithm::ALL {
        assert_eq!(Algorithm::from_key(a.key()).unwrap(), a);
    }
    assert!(Algorithm::from_key("ges").is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let truth = random_dag(4, 0.6, &mut rng);
    let data = simulate(&truth, |_, _| 1.0, 400, &mut rng, &gaussian);
    for a in Algorithm::ALL {
        let (g, _) = a.learn(&data, 0).unwrap();
        assert_eq!(g.n_nodes(), 4);
    }
}
