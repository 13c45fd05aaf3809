mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use slim_core::dataset::train_test_split;
use slim_core::diagnostics::{effect_curves, leaf_importance, split_contributions};
use slim_core::io::{
    export_dot, load_csv, load_tree, save_tree, write_dataset, write_diagnostics,
    write_predictions, IoError,
};
use slim_core::simgen::simulate;
use slim_core::tree::{grow, prune, refit_l1};
use slim_core::{
    DesignSpec, ErrorCategory, FeatureKind, ModelMeta, RunConfig, Schema, SimKind, SlimError,
    SurrogateDataset, Tree,
};

use report::{fit_table, node_table, Part};

#[derive(Parser)]
#[command(name = "slim", version, about = "Fit and inspect surrogate model trees")]
struct Cli {
    /// Worker threads for split search (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Write a simulated dataset (columns x1..x10, f, y).
    Simulate(SimulateArgs),
    /// Grow, prune and save a tree, then print a fit report.
    Fit(FitArgs),
    /// Write one prediction per data row.
    Predict(PredictArgs),
    /// Print fidelity and accuracy on the stored train/test split.
    Evaluate(ModelData),
    /// Write importance, split-contribution and effect-curve tables.
    Diagnose(DiagnoseArgs),
    /// Render the tree.
    Export(ExportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: SimKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<SimKind, String> {
    s.parse()
}

/// Fit settings. Every flag overrides the matching key of `--config`.
#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Where to write the tree JSON.
    #[arg(long)]
    out: PathBuf,
    /// Flat `key = value` settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated model features (default: every other column).
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    categorical: Option<String>,
    /// Surrogate response column.
    #[arg(long)]
    response: Option<String>,
    /// Original response column, enables accuracy rows.
    #[arg(long)]
    original: Option<String>,
    /// Column of train/test tags.
    #[arg(long)]
    tag: Option<String>,
    /// identity | logit
    #[arg(long)]
    transform: Option<String>,
    #[arg(long)]
    knots: Option<String>,
    /// Per-feature knot count, NAME=K; repeatable.
    #[arg(long = "knots-for", value_name = "NAME=K")]
    knots_for: Vec<String>,
    /// spline | linear
    #[arg(long)]
    basis: Option<String>,
    /// Comma-separated features that use the raw value.
    #[arg(long)]
    linear: Option<String>,
    #[arg(long)]
    num_bins: Option<String>,
    #[arg(long)]
    max_depth: Option<String>,
    #[arg(long)]
    min_samples_leaf: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    lambda_grid: Option<String>,
    /// sse | gcv
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    min_gain: Option<String>,
    /// true | false
    #[arg(long)]
    prune: Option<String>,
    #[arg(long)]
    r2_threshold: Option<String>,
    #[arg(long)]
    dsse_fraction: Option<String>,
    #[arg(long)]
    lambda1: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    train_fraction: Option<String>,
    /// continuous | binary
    #[arg(long)]
    task: Option<String>,
}

impl FitArgs {
    fn overrides(&self) -> Vec<(String, &str)> {
        let fixed = [
            ("features", &self.features),
            ("categorical", &self.categorical),
            ("response", &self.response),
            ("original", &self.original),
            ("tag", &self.tag),
            ("transform", &self.transform),
            ("knots", &self.knots),
            ("basis", &self.basis),
            ("linear", &self.linear),
            ("num_bins", &self.num_bins),
            ("max_depth", &self.max_depth),
            ("min_samples_leaf", &self.min_samples_leaf),
            ("lambda", &self.lambda),
            ("lambda_grid", &self.lambda_grid),
            ("loss", &self.loss),
            ("min_gain", &self.min_gain),
            ("prune", &self.prune),
            ("r2_threshold", &self.r2_threshold),
            ("dsse_fraction", &self.dsse_fraction),
            ("lambda1", &self.lambda1),
            ("seed", &self.seed),
            ("train_fraction", &self.train_fraction),
            ("task", &self.task),
        ];
        let mut out: Vec<(String, &str)> = fixed
            .into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k.to_owned(), v)))
            .collect();
        for spec in &self.knots_for {
            let (name, k) = spec.split_once('=').unwrap_or((spec.as_str(), ""));
            out.push((format!("knots.{name}"), k));
        }
        out
    }
}

#[derive(Args)]
struct ModelData {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    io: ModelData,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rows {
    Train,
    Test,
    All,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    io: ModelData,
    #[arg(long)]
    out_dir: PathBuf,
    /// Rows the diagnostics are computed on.
    #[arg(long, value_enum, default_value = "train")]
    rows: Rows,
    #[arg(long, default_value_t = slim_core::diagnostics::DEFAULT_GRID_POINTS)]
    grid_points: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dot,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "dot")]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Run(SlimError),
}

impl<E: Into<SlimError>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| IoError::file(p, e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn stdout_error(e: io::Error) -> Failure {
    Failure::Run(IoError::Stream(e).into())
}

fn run_simulate(args: SimulateArgs) -> Outcome {
    if !(args.sigma >= 0.0 && args.sigma.is_finite()) {
        return Err(Failure::Usage(format!(
            "--sigma must be non-negative, got {}",
            args.sigma
        )));
    }
    if args.n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    let sim = simulate(args.kind, args.n, args.sigma, args.seed)?;
    let mut out = output(args.out.as_deref())?;
    write_dataset(&mut out, &sim.dataset(), "f", "y", "tag")?;
    out.flush().map_err(stdout_error)?;
    Ok(())
}

/// Train and test rows: from the tag column when there is one, otherwise a
/// seeded split.
fn partition(
    dataset: &SurrogateDataset,
    meta: &ModelMeta,
) -> Result<(Vec<usize>, Vec<usize>), Failure> {
    if meta.tag.is_some() {
        if let Some(split) = dataset.tagged_split() {
            return Ok(split);
        }
    }
    Ok(train_test_split(dataset.len(), meta.train_fraction, meta.seed)?)
}

fn run_fit(args: FitArgs, threads: Option<usize>) -> Outcome {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    for (key, value) in args.overrides() {
        cfg.set(&key, value)?;
    }
    cfg.validate()?;
    if let Some(n) = threads.or(cfg.threads) {
        set_threads(n);
    }
    let dataset = load_csv(&args.data, &cfg.schema())?;
    let meta = ModelMeta {
        response: cfg.response.clone(),
        original: cfg.original.clone(),
        transform: cfg.transform,
        binary: cfg.binary,
        tag: cfg.tag.clone(),
        seed: cfg.seed,
        train_fraction: cfg.train_fraction,
    };
    let (train_rows, test_rows) = partition(&dataset, &meta)?;
    if train_rows.is_empty() {
        return Err(Failure::Usage("the training partition is empty".into()));
    }
    let train = dataset.subset(&train_rows);
    let all: Vec<usize> = (0..train.len()).collect();
    let spec = DesignSpec::fit(&train, &all, &cfg.basis_options())?;
    log::info!("design width {} over {} training rows", spec.width, train.len());
    let grown = grow(&train, &spec, &cfg.grow_config())?;
    let mut tree = if cfg.prune {
        prune(&grown, cfg.r2_threshold, cfg.dsse_fraction)
    } else {
        grown.clone()
    };
    if let Some(l1) = cfg.lambda1 {
        tree = refit_l1(&tree, &train, l1)?;
    }
    save_tree(&args.out, &tree, &meta)?;

    let mut out = io::stdout().lock();
    let leaves = tree.leaves().count();
    let summary = format!(
        "grown: {} nodes, depth {}; final: {} nodes, {} leaves, depth {}\n\n{}\n{}",
        grown.len(),
        grown.max_depth(),
        tree.len(),
        leaves,
        tree.max_depth(),
        node_table(&tree),
        fit_table(
            &tree,
            &dataset,
            &[Part { name: "Train", rows: &train_rows }, Part { name: "Test", rows: &test_rows }],
            cfg.task(),
        )?
    );
    out.write_all(summary.as_bytes()).map_err(stdout_error)?;
    Ok(())
}

/// Reads a data file against a saved model's feature list. The response,
/// original and tag columns are used when present.
fn load_for_model(path: &Path, tree: &Tree, meta: &ModelMeta) -> Result<SurrogateDataset, Failure> {
    let mut schema = Schema {
        response: meta.response.clone(),
        original: meta.original.clone(),
        tag: meta.tag.clone(),
        features: Some(tree.spec.features.iter().map(|f| f.name.clone()).collect()),
        categorical: tree
            .spec
            .features
            .iter()
            .filter(|f| f.kind == FeatureKind::Categorical)
            .map(|f| f.name.clone())
            .collect(),
        transform: meta.transform,
        response_optional: true,
    };
    loop {
        match load_csv(path, &schema) {
            Err(IoError::MissingColumn(c)) if schema.original.as_ref() == Some(&c) => {
                schema.original = None;
            }
            Err(IoError::MissingColumn(c)) if schema.tag.as_ref() == Some(&c) => {
                schema.tag = None;
            }
            other => return Ok(other?),
        }
    }
}

fn run_predict(args: PredictArgs) -> Outcome {
    let (tree, meta) = load_tree(&args.io.model)?;
    let dataset = load_for_model(&args.io.data, &tree, &meta)?;
    let predictions = tree.predict(&dataset)?;
    let leaves = tree.route_dataset(&dataset)?;
    let mut out = output(args.out.as_deref())?;
    write_predictions(&mut out, &predictions, &leaves)?;
    out.flush().map_err(stdout_error)?;
    Ok(())
}

fn run_evaluate(args: ModelData) -> Outcome {
    let (tree, meta) = load_tree(&args.model)?;
    let dataset = load_for_model(&args.data, &tree, &meta)?;
    let (train, test) = partition(&dataset, &meta)?;
    let task = if meta.binary {
        slim_core::Task::Binary {
            logit_scale: meta.transform == slim_core::Transform::Logit,
        }
    } else {
        slim_core::Task::Continuous
    };
    let table = fit_table(
        &tree,
        &dataset,
        &[Part { name: "Train", rows: &train }, Part { name: "Test", rows: &test }],
        task,
    )?;
    io::stdout().lock().write_all(table.as_bytes()).map_err(stdout_error)?;
    Ok(())
}

fn run_diagnose(args: DiagnoseArgs) -> Outcome {
    let (tree, meta) = load_tree(&args.io.model)?;
    let dataset = load_for_model(&args.io.data, &tree, &meta)?;
    let (train, test) = partition(&dataset, &meta)?;
    let rows = match args.rows {
        Rows::Train => dataset.subset(&train),
        Rows::Test => dataset.subset(&test),
        Rows::All => dataset,
    };
    let importance = leaf_importance(&tree, &rows)?;
    let contributions = split_contributions(&tree, &rows)?;
    let curves = effect_curves(&tree, args.grid_points)?;
    write_diagnostics(&args.out_dir, &tree, &importance, &contributions, &curves)?;
    Ok(())
}

fn run_export(args: ExportArgs) -> Outcome {
    let (tree, _) = load_tree(&args.model)?;
    let text = match args.format {
        Format::Dot => export_dot(&tree),
    };
    let mut out = output(args.out.as_deref())?;
    out.write_all(text.as_bytes()).map_err(stdout_error)?;
    out.flush().map_err(stdout_error)?;
    Ok(())
}

fn set_threads(n: usize) {
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        log::warn!("could not size the worker pool: {e}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .init();
    if cli.threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    if let (Some(n), false) = (cli.threads, matches!(cli.command, Command::Fit(_))) {
        set_threads(n);
    }
    let result = match cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Fit(a) => run_fit(a, cli.threads),
        Command::Predict(a) => run_predict(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Diagnose(a) => run_diagnose(a),
        Command::Export(a) => run_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.category() {
                ErrorCategory::Argument => 2,
                ErrorCategory::Data => 3,
                ErrorCategory::Numerical => 4,
            })
        }
    }
}
