use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use semisynth::graph::{Dag, GraphFile, LayeredDag, PriorKnowledge};
use semisynth::DatasetTable;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semisynth")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_shape(path: &Path) -> (usize, usize) {
    let t = DatasetTable::load_csv(path).unwrap();
    (t.n_rows(), t.n_cols())
}

/// Linear-Gaussian chain a -> b -> c -> d in one process.
fn toy(dir: &Path, n: usize) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for i in 0..4 {
        let c = (0..n)
            .map(|r| normal.sample(&mut rng) + if i > 0 { 0.9 * cols[i - 1][r] } else { 0.0 })
            .collect();
        cols.push(c);
    }
    let names: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
    let data = dir.join("toy.csv");
    DatasetTable::new(names.clone(), cols).unwrap().save_csv(&data).unwrap();
    let dag = Dag::new(names, [(0, 1), (1, 2), (2, 3)]).unwrap();
    let graph = dir.join("toy.json");
    GraphFile::from_layered(&LayeredDag::single_process(dag)).write(&graph).unwrap();
    (p(&data).to_string(), p(&graph).to_string())
}

#[test]
fn genref_shapes_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["genref", "--rows", "500", "--seed", "4", "--out-dir", p(&a)]);
    ok(&["genref", "--rows", "500", "--seed", "4", "--out-dir", p(&b)]);
    assert_eq!(csv_shape(&a.join("data.csv")), (500, 98));
    for f in ["data.csv", "truth.json", "prior.json", "config.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    // the echoed config regenerates the same files
    let c = dir.path().join("c");
    ok(&["genref", "--config", p(&a.join("config.json")), "--out-dir", p(&c)]);
    assert_eq!(std::fs::read(a.join("data.csv")).unwrap(), std::fs::read(c.join("data.csv")).unwrap());
}

#[test]
fn genref_unwritable_path_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let out = run(&["genref", "--rows", "10", "--out-dir", p(&file.join("sub"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn learn_edges_on_fig4_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let mut exact = 0;
    for seed in 0..10 {
        let d = dir.path().join(format!("f{seed}"));
        let s = seed.to_string();
        ok(&["genref", "--fixture", "fig4", "--seed", &s, "--rows", "2000", "--out-dir", p(&d)]);
        ok(&[
            "learn-edges",
            "--data",
            p(&d.join("data.csv")),
            "--prior",
            p(&d.join("prior.json")),
            "--seed",
            &s,
            "--out",
            p(&d.join("edges.json")),
            "--truth-out",
            p(&d.join("merged.json")),
        ]);
        let merged = GraphFile::read(&d.join("merged.json")).unwrap().to_layered().unwrap();
        let truth = GraphFile::read(&d.join("truth.json")).unwrap().to_layered().unwrap();
        if merged.fingerprint() == truth.fingerprint() {
            exact += 1;
        }
    }
    assert!(exact >= 9, "{exact}/10");
}

#[test]
fn learn_edges_on_independent_processes_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let names: Vec<String> = ["a1", "a2", "b1", "b2"].iter().map(|s| s.to_string()).collect();
    let dag = Dag::new(names.clone(), [(0, 1), (2, 3)]).unwrap();
    let within = LayeredDag::new(dag, vec![1, 1, 2, 2], vec![1, 1]).unwrap();
    let prior = PriorKnowledge::new(within, vec![], None).unwrap();
    GraphFile::from_prior(&prior).write(&dir.path().join("prior.json")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = 2000;
    let mut g = || (0..n).map(|_| normal.sample(&mut rng)).collect::<Vec<f64>>();
    let (a1, e2, b1, e4) = (g(), g(), g(), g());
    let a2 = a1.iter().zip(&e2).map(|(x, e)| x.tanh() + e).collect();
    let b2 = b1.iter().zip(&e4).map(|(x, e)| x * x + e).collect();
    DatasetTable::new(names, vec![a1, a2, b1, b2])
        .unwrap()
        .save_csv(&dir.path().join("data.csv"))
        .unwrap();
    let edges = dir.path().join("edges.json");
    ok(&[
        "learn-edges",
        "--data",
        p(&dir.path().join("data.csv")),
        "--prior",
        p(&dir.path().join("prior.json")),
        "--out",
        p(&edges),
        "--truth-out",
        p(&dir.path().join("merged.json")),
    ]);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&edges).unwrap()).unwrap();
    assert_eq!(v["edges"], serde_json::json!([]));
}

#[test]
fn learn_edges_missing_prediction_column_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["genref", "--rows", "300", "--seed", "1", "--out-dir", p(d)]);
    // without predictions.csv the declared mechanism columns are missing
    let out = run(&[
        "learn-edges",
        "--data",
        p(&d.join("data.csv")),
        "--prior",
        p(&d.join("prior.json")),
        "--out",
        p(&d.join("e.json")),
        "--truth-out",
        p(&d.join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("_pred"));
}

#[test]
fn fit_sample_and_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (data, graph) = toy(d, 5000);
    let model = d.join("toy.model");
    ok(&["fit", "--data", &data, "--graph", &graph, "--out", p(&model), "--trees", "200", "--seed", "3"]);
    let one = d.join("one.csv");
    ok(&["sample", "--model", p(&model), "-n", "1", "--out", p(&one), "--graph", &graph]);
    assert_eq!(csv_shape(&one), (1, 4));
    let (s1, s2) = (d.join("s1.csv"), d.join("s2.csv"));
    ok(&["sample", "--model", p(&model), "-n", "300", "--seed", "9", "--out", p(&s1)]);
    ok(&["sample", "--model", p(&model), "-n", "300", "--seed", "9", "--out", p(&s2)]);
    assert_eq!(std::fs::read(&s1).unwrap(), std::fs::read(&s2).unwrap());
    let out = run(&["sample", "--model", p(&model), "-n", "0", "--out", p(&s1)]);
    assert_eq!(out.status.code(), Some(2));

    let rep = d.join("fid.json");
    ok(&["fidelity", "--data", &data, "--model", p(&model), "-n", "5000", "--seed", "1", "--out", p(&rep)]);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&rep).unwrap()).unwrap();
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 4);
    let ks: Vec<f64> = entries.iter().map(|e| e["ks"].as_f64().unwrap()).collect();
    assert!(ks.windows(2).all(|w| w[0] >= w[1]));
    assert!(v["non_source"]["max"].as_f64().unwrap() < 0.1);
}

#[test]
fn corrupted_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (data, graph) = toy(d, 300);
    let model = d.join("m");
    ok(&["fit", "--data", &data, "--graph", &graph, "--out", p(&model), "--trees", "5"]);
    let mut bytes = std::fs::read(&model).unwrap();
    let k = bytes.len() / 2;
    bytes[k] ^= 1;
    std::fs::write(&model, bytes).unwrap();
    let out = run(&["sample", "--model", p(&model), "-n", "1", "--out", p(&d.join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}

#[test]
fn cell_models_per_station() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["genref", "--rows", "300", "--seed", "2", "--out-dir", p(d)]);
    let cells = d.join("cells");
    ok(&[
        "fit",
        "--data",
        p(&d.join("data.csv")),
        "--graph",
        p(&d.join("truth.json")),
        "--out",
        p(&cells),
        "--cells",
        "--trees",
        "3",
    ]);
    let mut files: Vec<String> = std::fs::read_dir(&cells)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, (1..=5).map(|s| format!("station{s}.model")).collect::<Vec<_>>());
}

#[test]
fn benchmark_rows_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (data, graph) = toy(d, 1000);
    let model = d.join("toy.model");
    ok(&["fit", "--data", &data, "--graph", &graph, "--out", p(&model), "--trees", "20"]);

    let rep = d.join("snr.json");
    let out = ok(&[
        "benchmark",
        "--data-model",
        p(&model),
        "--truth",
        &graph,
        "--algorithms",
        "snr",
        "--runs",
        "2",
        "-n",
        "200",
        "--standardize",
        "--out",
        p(&rep),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("empty"));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&rep).unwrap()).unwrap();
    let algs: Vec<&str> = v["runs"].as_array().unwrap().iter().map(|r| r["algorithm"].as_str().unwrap()).collect();
    assert_eq!(algs, vec!["snr", "empty", "snr", "empty"]);
    assert!(v["runs"][0]["standardized"].as_bool().unwrap());
    assert!(d.join("snr.json.boxplot.csv").exists());

    let rep = d.join("pc.json");
    ok(&[
        "benchmark", "--data-model", p(&model), "--truth", &graph, "--algorithms", "pc", "--runs", "1", "--out", p(&rep),
    ]);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&rep).unwrap()).unwrap();
    let pc: Vec<&serde_json::Value> = v["runs"].as_array().unwrap().iter().filter(|r| r["algorithm"] == "pc").collect();
    assert_eq!(pc.len(), 1);
    assert!(pc[0]["wall_time_seconds"].as_f64().unwrap() > 0.0);

    let out = run(&[
        "benchmark", "--data-model", p(&model), "--truth", &graph, "--algorithms", "ges", "--out", p(&rep),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("pc") && msg.contains("notears"), "{msg}");
}
