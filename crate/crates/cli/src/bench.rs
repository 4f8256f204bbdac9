//! Benchmark harness: repeated samples from a fitted model, scored
//! structure learning per algorithm, plus an empty-graph baseline.

use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use semisynth::discovery::Algorithm;
use semisynth::graph::Dag;
use semisynth::metrics::{precision_recall_f1, varsortability, StructuralScore};
use semisynth::synth::{sample, PipelineModel};
use semisynth::{DatasetTable, Error, Result};
use serde::{Deserialize, Serialize};

pub const EMPTY_GRAPH: &str = "empty";

/// Everything needed to rerun a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub data_model: String,
    pub truth: String,
    pub algorithms: Vec<String>,
    pub runs: usize,
    pub n: usize,
    pub standardize: bool,
    pub seed: u64,
    pub model_graph_fingerprint: String,
    pub model_data_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunNotes {
    #[serde(default)]
    pub lenient_completion: bool,
    #[serde(default)]
    pub not_converged: bool,
    #[serde(default)]
    pub pruned_edges: Vec<(String, String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub algorithm: String,
    pub run: usize,
    pub seed: u64,
    pub n: usize,
    pub standardized: bool,
    pub score: StructuralScore,
    /// Varsortability of the input data w.r.t. the truth; absent when the
    /// truth has no directed paths.
    pub varsortability: Option<f64>,
    pub wall_time_seconds: f64,
    pub notes: RunNotes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub runs: usize,
    pub shd_mean: f64,
    pub shd_median: f64,
    pub precision_mean: f64,
    pub recall_mean: f64,
    pub f1_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub software_version: String,
    pub config: BenchConfig,
    pub runs: Vec<RunRow>,
    pub summary: Vec<SummaryRow>,
}

/// Seed of run `r`, derived from the master seed.
pub fn run_seed(seed: u64, r: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng.next_u64()
}

pub fn parse_algorithms(list: &[String]) -> Result<Vec<Algorithm>> {
    if list.is_empty() {
        return Err(Error::Input("no algorithms given".into()));
    }
    list.iter().map(|k| Algorithm::from_key(k.trim())).collect()
}

pub fn run_benchmark(model: &PipelineModel, truth: &Dag, cfg: &BenchConfig) -> Result<BenchmarkReport> {
    let algorithms = parse_algorithms(&cfg.algorithms)?;
    let mut a: Vec<&String> = model.dag().dag().nodes().iter().collect();
    let mut b: Vec<&String> = truth.nodes().iter().collect();
    a.sort();
    b.sort();
    if a != b {
        return Err(Error::Input("truth graph and model have different node sets".into()));
    }
    if cfg.runs == 0 || cfg.n == 0 {
        return Err(Error::Input("runs and n must be positive".into()));
    }

    let datasets: Vec<(u64, DatasetTable, Option<f64>)> = (0..cfg.runs)
        .map(|r| {
            let seed = run_seed(cfg.seed, r);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut data = sample(model, cfg.n, &mut rng)?;
            if cfg.standardize {
                data = data.standardized();
            }
            let v = varsortability(&data, truth).ok();
            Ok((seed, data, v))
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, Algorithm)> = (0..cfg.runs)
        .flat_map(|r| algorithms.iter().map(move |&a| (r, a)))
        .collect();
    let learned: Vec<RunRow> = cells
        .par_iter()
        .map(|&(r, alg)| {
            let (seed, data, v) = &datasets[r];
            let start = Instant::now();
            let (dag, notes) = alg
                .learn(data, *seed)
                .map_err(|e| Error::Numeric(format!("{alg} failed on run {r}: {e}")))?;
            let wall = start.elapsed().as_secs_f64();
            Ok(RunRow {
                algorithm: alg.key().to_string(),
                run: r,
                seed: *seed,
                n: cfg.n,
                standardized: cfg.standardize,
                score: precision_recall_f1(truth, &dag)?,
                varsortability: *v,
                wall_time_seconds: wall,
                notes: RunNotes {
                    lenient_completion: notes.lenient_completion,
                    not_converged: notes.not_converged,
                    pruned_edges: notes.pruned,
                },
            })
        })
        .collect::<Result<_>>()?;

    let empty = Dag::empty(truth.nodes().to_vec())?;
    let mut rows = Vec::with_capacity(learned.len() + cfg.runs);
    let mut it = learned.into_iter();
    for (r, (seed, _, v)) in datasets.iter().enumerate() {
        rows.extend(it.by_ref().take(algorithms.len()));
        rows.push(RunRow {
            algorithm: EMPTY_GRAPH.into(),
            run: r,
            seed: *seed,
            n: cfg.n,
            standardized: cfg.standardize,
            score: precision_recall_f1(truth, &empty)?,
            varsortability: *v,
            wall_time_seconds: 0.0,
            notes: RunNotes {
                lenient_completion: false,
                not_converged: false,
                pruned_edges: Vec::new(),
            },
        });
    }

    let mut keys: Vec<String> = algorithms.iter().map(|a| a.key().to_string()).collect();
    keys.push(EMPTY_GRAPH.into());
    let summary = keys.iter().map(|k| summarize(k, &rows)).collect();
    Ok(BenchmarkReport {
        software_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        runs: rows,
        summary,
    })
}

fn summarize(key: &str, rows: &[RunRow]) -> SummaryRow {
    let sel: Vec<&StructuralScore> = rows.iter().filter(|r| r.algorithm == key).map(|r| &r.score).collect();
    let k = sel.len() as f64;
    let mean = |f: &dyn Fn(&StructuralScore) -> f64| sel.iter().map(|s| f(s)).sum::<f64>() / k;
    let mut shd: Vec<f64> = sel.iter().map(|s| s.shd as f64).collect();
    shd.sort_by(f64::total_cmp);
    let m = shd.len();
    let median = if m % 2 == 1 {
        shd[m / 2]
    } else {
        (shd[m / 2 - 1] + shd[m / 2]) / 2.0
    };
    SummaryRow {
        algorithm: key.to_string(),
        runs: sel.len(),
        shd_mean: mean(&|s| s.shd as f64),
        shd_median: median,
        precision_mean: mean(&|s| s.precision),
        recall_mean: mean(&|s| s.recall),
        f1_mean: mean(&|s| s.f1),
    }
}

/// One line per (algorithm, run) with the metric values, for box plots.
pub fn write_boxplot_csv(report: &BenchmarkReport, path: &Path) -> Result<()> {
    let mut out = String::from("algorithm,run,shd,precision,recall,f1\n");
    for r in &report.runs {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.algorithm, r.run, r.score.shd, r.score.precision, r.score.recall, r.score.f1
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn summary_table(report: &BenchmarkReport) -> String {
    let mut s = format!(
        "{:<10} {:>5} {:>9} {:>10} {:>9} {:>9} {:>9}\n",
        "algorithm", "runs", "SHD mean", "SHD median", "precision", "recall", "F1"
    );
    for r in &report.summary {
        s.push_str(&format!(
            "{:<10} {:>5} {:>9.2} {:>10.1} {:>9.3} {:>9.3} {:>9.3}\n",
            r.algorithm, r.runs, r.shd_mean, r.shd_median, r.precision_mean, r.recall_mean, r.f1_mean
        ));
    }
    s
}
