mod bench;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semisynth::drf::DrfConfig;
use semisynth::error::ErrorKind;
use semisynth::graph::{merge_ground_truth, GraphFile, LayeredDag};
use semisynth::refline::{fig4_fixture, generate_line, LineConfig};
use semisynth::spam::{learn_cross_process_edges_with, PredictorMode, SpamConfig};
use semisynth::synth::{
    fidelity_report, fit_cell_pipelines, fit_pipeline, load_model, sample, save_model, PipelineConfig, PipelineModel,
};
use semisynth::{DatasetTable, Error, Result};
use serde::Serialize;

use bench::{parse_algorithms, run_benchmark, summary_table, write_boxplot_csv, BenchConfig, BenchmarkReport};

/// Environment variable holding the worker-thread count.
const WORKERS_ENV: &str = "SEMISYNTH_WORKERS";

#[derive(Parser)]
#[command(name = "semisynth", version, about = "Semisynthetic data generation and causal discovery benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the reference assembly line (or a fixture): data, truth and prior.
    Genref(GenrefArgs),
    /// Learn edges between processes and merge them with the prior.
    LearnEdges(LearnEdgesArgs),
    /// Fit a generator model on data and a graph.
    Fit(FitArgs),
    /// Draw rows from a fitted model.
    Sample(SampleArgs),
    /// Benchmark structure learning on samples from a model.
    Benchmark(BenchmarkArgs),
    /// Compare model samples with the training data, node by node.
    Fidelity(FidelityArgs),
}

#[derive(Args)]
struct GenrefArgs {
    /// JSON line configuration; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rows: Option<usize>,
    /// Emit a fixed fixture instead of the line (available: fig4).
    #[arg(long)]
    fixture: Option<String>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct LearnEdgesArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    prior: PathBuf,
    /// Mechanism prediction columns, joined onto the data by row.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Output: learned cross-process edges.
    #[arg(long)]
    out: PathBuf,
    /// Output: prior graphs merged with the learned edges.
    #[arg(long)]
    truth_out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Leave within-process parents out of the predictor sets.
    #[arg(long)]
    naive: bool,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    /// Model file, or a directory of per-station models with --cells.
    #[arg(long)]
    out: PathBuf,
    /// Fit one model per station.
    #[arg(long)]
    cells: bool,
    #[arg(long, default_value_t = DrfConfig::default().num_trees)]
    trees: usize,
    #[arg(long, default_value_t = DrfConfig::default().min_node_size)]
    min_node_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(short = 'n', long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Refuse to sample unless the model was fitted on this graph.
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long, required_unless_present = "rerun")]
    data_model: Option<PathBuf>,
    #[arg(long, required_unless_present = "rerun")]
    truth: Option<PathBuf>,
    /// Comma-separated keys: pc, lingam, notears, snr.
    #[arg(long, value_delimiter = ',', default_value = "pc,lingam,notears,snr")]
    algorithms: Vec<String>,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(short = 'n', long, default_value_t = 500)]
    n: usize,
    /// Z-score every sampled dataset before structure learning.
    #[arg(long)]
    standardize: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Box-plot values CSV; defaults to the report path with a
    /// `.boxplot.csv` suffix.
    #[arg(long)]
    boxplot: Option<PathBuf>,
    /// Repeat the benchmark recorded in this report's config echo.
    #[arg(long)]
    rerun: Option<PathBuf>,
}

#[derive(Args)]
struct FidelityArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(short = 'n', long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Genref(a) => genref(a),
        Command::LearnEdges(a) => learn_edges(a),
        Command::Fit(a) => fit(a),
        Command::Sample(a) => sample_cmd(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Fidelity(a) => fidelity(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::Input => ExitCode::from(2),
                ErrorKind::Numeric => ExitCode::from(3),
            }
        }
    }
}

fn configure_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Input(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Input(format!("cannot start worker pool: {e}")))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Input(format!("{}: {io}", path.display())),
        Error::Json(j) => Error::Input(format!("{}: {j}", path.display())),
        Error::Csv(c) => Error::Input(format!("{}: {c}", path.display())),
        other => other,
    })
}

fn read_csv(path: &Path) -> Result<DatasetTable> {
    with_path(path, DatasetTable::load_csv(path))
}

fn write_csv(table: &DatasetTable, path: &Path) -> Result<()> {
    with_path(path, table.save_csv(path))
}

fn read_graph(path: &Path) -> Result<GraphFile> {
    with_path(path, GraphFile::read(path))
}

fn write_graph(g: &GraphFile, path: &Path) -> Result<()> {
    with_path(path, g.write(path))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    with_path(path, std::fs::write(path, text).map_err(Error::from))
}

fn load(path: &Path) -> Result<PipelineModel> {
    with_path(path, load_model(path))
}

fn genref(a: GenrefArgs) -> Result<()> {
    with_path(&a.out_dir, std::fs::create_dir_all(&a.out_dir).map_err(Error::from))?;
    if let Some(f) = &a.fixture {
        if f != "fig4" {
            return Err(Error::Input(format!("unknown fixture `{f}` (available: fig4)")));
        }
        let fx = fig4_fixture();
        let seed = a.seed.unwrap_or(0);
        let rows = a.rows.unwrap_or(2000);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        write_csv(&fx.sample(rows, &mut rng), &a.out_dir.join("data.csv"))?;
        write_graph(&GraphFile::from_layered(&fx.truth), &a.out_dir.join("truth.json"))?;
        write_graph(&GraphFile::from_prior(&fx.prior), &a.out_dir.join("prior.json"))?;
        return write_json(
            &serde_json::json!({"fixture": "fig4", "seed": seed, "rows": rows}),
            &a.out_dir.join("config.json"),
        );
    }
    let mut cfg: LineConfig = match &a.config {
        Some(p) => {
            let text = with_path(p, std::fs::read_to_string(p).map_err(Error::from))?;
            with_path(p, serde_json::from_str(&text).map_err(Error::from))?
        }
        None => LineConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(r) = a.rows {
        cfg.rows = r;
    }
    let line = generate_line(&cfg)?;
    write_csv(&line.data, &a.out_dir.join("data.csv"))?;
    if line.predictions.n_cols() > 0 {
        write_csv(&line.predictions, &a.out_dir.join("predictions.csv"))?;
    }
    write_graph(&GraphFile::from_layered(&line.truth), &a.out_dir.join("truth.json"))?;
    write_graph(&GraphFile::from_prior(&line.prior), &a.out_dir.join("prior.json"))?;
    write_json(&cfg, &a.out_dir.join("config.json"))
}

#[derive(Serialize)]
struct FitSummary<'a> {
    target: &'a str,
    predictors: &'a [String],
    active: &'a [String],
    lambda: f64,
    converged: bool,
}

#[derive(Serialize)]
struct EdgesFile<'a> {
    seed: u64,
    naive: bool,
    edges: &'a [(String, String)],
    fits: Vec<FitSummary<'a>>,
}

fn learn_edges(a: LearnEdgesArgs) -> Result<()> {
    let mut data = read_csv(&a.data)?;
    if let Some(p) = &a.predictions {
        data = data.join(&read_csv(p)?)?;
    }
    let prior = read_graph(&a.prior)?.to_prior()?;
    let cfg = SpamConfig {
        seed: a.seed,
        ..SpamConfig::default()
    };
    let mode = if a.naive { PredictorMode::Naive } else { PredictorMode::WithParents };
    let learned = learn_cross_process_edges_with(&data, &prior, &cfg, mode)?;
    let merged = merge_ground_truth(&prior, &learned.edges)?;
    let file = EdgesFile {
        seed: a.seed,
        naive: a.naive,
        edges: &learned.edges,
        fits: learned
            .fits
            .iter()
            .map(|f| FitSummary {
                target: &f.target,
                predictors: &f.predictors,
                active: &f.active,
                lambda: f.lambda,
                converged: f.converged,
            })
            .collect(),
    };
    write_json(&file, &a.out)?;
    write_graph(&GraphFile::from_layered(&merged), &a.truth_out)?;
    eprintln!("{} cross-process edges", learned.edges.len());
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let data = read_csv(&a.data)?;
    let graph = read_graph(&a.graph)?.to_layered()?;
    let cfg = PipelineConfig {
        drf: DrfConfig {
            num_trees: a.trees,
            min_node_size: a.min_node_size,
            ..DrfConfig::default()
        },
        seed: a.seed,
    };
    if a.cells {
        with_path(&a.out, std::fs::create_dir_all(&a.out).map_err(Error::from))?;
        let models: BTreeMap<usize, PipelineModel> = fit_cell_pipelines(&data, &graph, &cfg)?;
        for (s, m) in &models {
            let p = a.out.join(format!("station{s}.model"));
            with_path(&p, save_model(m, &p))?;
        }
        eprintln!("{} station models written", models.len());
        return Ok(());
    }
    let model = fit_pipeline(&data, &graph, &cfg)?;
    with_path(&a.out, save_model(&model, &a.out))
}

fn check_graph(model: &PipelineModel, graph: &LayeredDag, what: &Path) -> Result<()> {
    if model.dag().fingerprint() != graph.fingerprint() {
        return Err(Error::Input(format!(
            "model was fitted on a different graph than {}",
            what.display()
        )));
    }
    Ok(())
}

fn sample_cmd(a: SampleArgs) -> Result<()> {
    let model = load(&a.model)?;
    if let Some(g) = &a.graph {
        check_graph(&model, &read_graph(g)?.to_layered()?, g)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    write_csv(&sample(&model, a.n, &mut rng)?, &a.out)
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let cfg = match &a.rerun {
        Some(p) => {
            let text = with_path(p, std::fs::read_to_string(p).map_err(Error::from))?;
            let old: BenchmarkReport = with_path(p, serde_json::from_str(&text).map_err(Error::from))?;
            old.config
        }
        None => {
            parse_algorithms(&a.algorithms)?;
            let model_path = a.data_model.clone().expect("required by clap");
            let model = load(&model_path)?;
            BenchConfig {
                data_model: model_path.display().to_string(),
                truth: a.truth.clone().expect("required by clap").display().to_string(),
                algorithms: a.algorithms.clone(),
                runs: a.runs,
                n: a.n,
                standardize: a.standardize,
                seed: a.seed,
                model_graph_fingerprint: model.dag().fingerprint(),
                model_data_fingerprint: model.meta().data_fingerprint.clone(),
            }
        }
    };
    let model_path = PathBuf::from(&cfg.data_model);
    let model = load(&model_path)?;
    if model.dag().fingerprint() != cfg.model_graph_fingerprint
        || model.meta().data_fingerprint != cfg.model_data_fingerprint
    {
        return Err(Error::Input(format!(
            "{} is not the model recorded in the benchmark config",
            model_path.display()
        )));
    }
    let truth_path = PathBuf::from(&cfg.truth);
    let truth = read_graph(&truth_path)?.to_layered()?;
    let report = run_benchmark(&model, truth.dag(), &cfg)?;
    write_json(&report, &a.out)?;
    let box_path = a.boxplot.clone().unwrap_or_else(|| {
        let mut s = a.out.clone().into_os_string();
        s.push(".boxplot.csv");
        PathBuf::from(s)
    });
    with_path(&box_path, write_boxplot_csv(&report, &box_path))?;
    print!("{}", summary_table(&report));
    Ok(())
}

fn fidelity(a: FidelityArgs) -> Result<()> {
    let data = read_csv(&a.data)?;
    let model = load(&a.model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let report = fidelity_report(&data, &model, a.n, &mut rng)?;
    write_json(&report, &a.out)?;
    if let Some(s) = &report.non_source {
        eprintln!("non-source KS: max {:.4}, mean {:.4}, min {:.4}", s.max, s.mean, s.min);
    }
    Ok(())
}
