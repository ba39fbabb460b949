use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand};

use perfweld_core::bench::{run_stencil_bench, synthesize, BenchPlan, SyntheticOracleSpec};
use perfweld_core::domain::{load_machine_spec, read_table, split_uniform, Dataset, Predict, RESPONSE};
use perfweld_core::eval::{gnuplot_data, learning_curve, score, summarize, summary_table};
use perfweld_core::hybrid::BagWeights;
use perfweld_core::io::write_atomic;
use perfweld_core::ml::{MaxFeatures, TreeParams};
use perfweld_core::model::{load_model, save_model, ModelContext, MODEL_NAMES};
use perfweld_core::repro;
use perfweld_core::stencil::CachePolicy;
use perfweld_core::Error;

const PREDICTION_COLUMN: &str = "predicted_seconds";

#[derive(Parser)]
#[command(name = "perfweld", version, about = "Analytical, learned and hybrid execution-time models")]
#[command(args_override_self = true)]
struct Cli {
    /// Worker threads for fitting and learning curves (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON object of flag values; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run timed kernel benchmarks.
    Bench {
        #[command(subcommand)]
        kind: BenchKind,
    },
    /// Fit a model on a uniform sample of a dataset and save it.
    Train(TrainArgs),
    /// Append predictions from a saved model to a CSV.
    Predict(PredictArgs),
    /// MAPE learning curves over training fractions.
    Curve(CurveArgs),
    /// Generate a synthetic dataset from an oracle spec.
    Synth(SynthArgs),
    /// Run a bundled experiment recipe.
    Repro(ReproArgs),
}

#[derive(Subcommand)]
enum BenchKind {
    /// Time the star stencil over a plan of grid, block and thread settings.
    Stencil {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ModelOpts {
    /// Machine spec JSON, required by analytical and hybrid models.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Stencil order for stencil models.
    #[arg(long, default_value_t = 1)]
    order: u64,
    #[arg(long, default_value = "write-allocate", value_parser = parse_policy)]
    cache_policy: CachePolicy,
    /// Timesteps the analytical stencil model accounts for.
    #[arg(long, default_value_t = 1)]
    timesteps: u64,
    #[arg(long, default_value_t = 100)]
    n_trees: usize,
    /// all, third, or a count.
    #[arg(long, default_value = "third")]
    max_features: MaxFeatures,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    min_samples_leaf: usize,
    /// Weighting of bagged hybrids: uniform or validation-mape.
    #[arg(long, default_value = "uniform", value_parser = parse_weights)]
    bag_weights: BagWeights,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_parser = PossibleValuesParser::new(MODEL_NAMES))]
    model: String,
    #[arg(long)]
    data: PathBuf,
    /// Training share of the rows; the rest is the test set.
    #[arg(long, value_parser = parse_fraction)]
    fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    opts: ModelOpts,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated model names.
    #[arg(long, value_delimiter = ',', required = true, value_parser = PossibleValuesParser::new(MODEL_NAMES))]
    models: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_fraction)]
    fractions: Vec<f64>,
    /// Number of seeds; seeds 0..N are used.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write gnuplot-ready summary data here.
    #[arg(long)]
    gnuplot: Option<PathBuf>,
    #[command(flatten)]
    opts: ModelOpts,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    oracle: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReproArgs {
    /// Recipe name; omit with --list.
    name: Option<String>,
    #[arg(long)]
    list: bool,
    /// Parent directory for timestamped results.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let f: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if f > 0.0 && f < 1.0 {
        Ok(f)
    } else {
        Err(format!("fraction must be in (0, 1), got {f}"))
    }
}

fn parse_policy(s: &str) -> Result<CachePolicy, String> {
    match s {
        "write-allocate" => Ok(CachePolicy::WriteAllocate),
        "no-write-allocate" => Ok(CachePolicy::NoWriteAllocate),
        _ => Err(format!("expected write-allocate or no-write-allocate, got {s:?}")),
    }
}

fn parse_weights(s: &str) -> Result<BagWeights, String> {
    match s {
        "uniform" => Ok(BagWeights::Uniform),
        "validation-mape" => Ok(BagWeights::ValidationMape),
        _ => Err(format!("expected uniform or validation-mape, got {s:?}")),
    }
}

enum Failure {
    User(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Internal(_) => Failure::Internal(e.to_string()),
            _ => Failure::User(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read_json(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

/// Inserts `--config` values as flags right after the subcommand so that
/// later explicit flags override them.
fn expand_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = Some(PathBuf::from(it.next().ok_or_else(|| Failure::User("--config needs a file".into()))?));
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = read_json(&path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::User(format!("{}: invalid JSON: {e}", path.display())))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Failure::User(format!("{}: config must be a JSON object", path.display())))?;
    let mut flags = Vec::new();
    for (key, v) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        let text = match v {
            serde_json::Value::Bool(true) => {
                flags.push(OsString::from(flag));
                continue;
            }
            serde_json::Value::Bool(false) | serde_json::Value::Null => continue,
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Array(items) => items
                .iter()
                .map(|i| i.as_str().map(str::to_string).unwrap_or_else(|| i.to_string()))
                .collect::<Vec<_>>()
                .join(","),
            other => other.to_string(),
        };
        flags.push(OsString::from(flag));
        flags.push(OsString::from(text));
    }
    let subcommands = ["bench", "train", "predict", "curve", "synth", "repro"];
    let Some(pos) = rest.iter().position(|a| subcommands.contains(&a.to_string_lossy().as_ref())) else {
        return Ok(rest);
    };
    let at = if rest[pos] == "bench" { (pos + 2).min(rest.len()) } else { pos + 1 };
    rest.splice(at..at, flags);
    Ok(rest)
}

fn context(opts: &ModelOpts, seed: u64) -> CliResult<ModelContext> {
    let machine = match &opts.spec {
        Some(p) => Some(load_machine_spec(p)?),
        None => None,
    };
    let params = TreeParams {
        max_depth: opts.max_depth,
        min_samples_leaf: opts.min_samples_leaf,
        n_trees: opts.n_trees,
        max_features: opts.max_features,
        seed,
        bootstrap: true,
    };
    params.validate()?;
    Ok(ModelContext {
        machine,
        order: opts.order,
        cache_policy: opts.cache_policy,
        timesteps: opts.timesteps,
        params,
        bag_weights: opts.bag_weights,
    })
}

fn load_data(path: &Path) -> CliResult<Dataset> {
    Ok(read_table(path)?.into_dataset_inferred(RESPONSE)?)
}

fn cmd_bench(kind: BenchKind) -> CliResult<()> {
    let BenchKind::Stencil { plan, out } = kind;
    let plan = BenchPlan::from_json_str(&read_json(&plan)?)?;
    let outcome = run_stencil_bench(&plan)?;
    for s in &outcome.skipped {
        eprintln!("skipped: {s}");
    }
    outcome.dataset.write_csv(&out)?;
    println!("wrote {} rows to {}", outcome.dataset.len(), out.display());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> CliResult<()> {
    let ds = load_data(&args.data)?;
    let ctx = context(&args.opts, args.seed)?;
    let spec = ctx.spec(&args.model)?;
    let (train, test) = match args.fraction {
        Some(f) => {
            let (a, b) = split_uniform(&ds, f, args.seed)?;
            (a, Some(b))
        }
        None => (ds, None),
    };
    let model = spec.fit(&train, args.seed)?;
    println!("model {} ({}), {} training rows", args.model, model.kind(), train.len());
    println!("train MAPE {:.4}", score(&model, &train)?);
    if let Some(test) = test.filter(|t| !t.is_empty()) {
        println!("test MAPE {:.4} on {} rows", score(&model, &test)?, test.len());
    }
    save_model(&model, &args.out)?;
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> CliResult<()> {
    let model = load_model(&args.model)?;
    let table = read_table(&args.data)?;
    if table.column(PREDICTION_COLUMN).is_some() {
        return Err(Failure::User(format!("input already has a {PREDICTION_COLUMN} column")));
    }
    let cols = model
        .schema()
        .feature_names()
        .iter()
        .map(|n| {
            table
                .column(n)
                .ok_or_else(|| Failure::User(format!("schema error: model needs column {n:?}, input has {:?}", table.header)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut out = table.header.join(",");
    out.push(',');
    out.push_str(PREDICTION_COLUMN);
    out.push('\n');
    for (i, row) in table.rows.iter().enumerate() {
        let x: Vec<f64> = cols.iter().map(|&c| row[c]).collect();
        let y = model
            .predict(&x)
            .map_err(|e| Failure::User(format!("row {}: {e}", i + 1)))?;
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push_str(&format!(",{y}\n"));
    }
    write_atomic(&args.out, out.as_bytes())?;
    println!("wrote {} predictions to {}", table.rows.len(), args.out.display());
    Ok(())
}

fn cmd_curve(args: CurveArgs) -> CliResult<()> {
    let ds = load_data(&args.data)?;
    if args.seeds == 0 {
        return Err(Failure::User("--seeds must be at least 1".into()));
    }
    let ctx = context(&args.opts, 0)?;
    let models = args.models.iter().map(|m| ctx.named(m)).collect::<Result<Vec<_>, _>>()?;
    for m in &models {
        // Surface schema mismatches before any fitting.
        if let perfweld_core::model::ModelSpec::Hybrid(h) = &m.spec {
            h.analytical.bind(ds.schema())?;
        }
    }
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let report = learning_curve(&ds, &args.fractions, &seeds, &models)?;
    report.write_csv(&args.out)?;
    let summary = summarize(&report)?;
    print!("{}", summary_table(&summary));
    if let Some(g) = &args.gnuplot {
        write_atomic(g, gnuplot_data(&summary).as_bytes())?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> CliResult<()> {
    let oracle = SyntheticOracleSpec::from_json_str(&read_json(&args.oracle)?)?;
    let ds = synthesize(&oracle)?;
    ds.write_csv(&args.out)?;
    println!("wrote {} rows to {}", ds.len(), args.out.display());
    Ok(())
}

fn cmd_repro(args: ReproArgs) -> CliResult<()> {
    if args.list {
        for name in repro::builtin_names() {
            let r = repro::builtin(name)?;
            println!("{name:<18} {}{}", r.description, if r.advisory { " [advisory]" } else { "" });
        }
        return Ok(());
    }
    let name = args
        .name
        .ok_or_else(|| Failure::User("give a recipe name or --list".into()))?;
    let recipe = repro::builtin(&name)?;
    let result = recipe.run(args.out.as_deref())?;
    print!("{}", summary_table(&result.summary));
    for c in &result.checks {
        println!(
            "criterion {}: {} ({}){}",
            c.criterion,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail,
            if recipe.advisory { " [advisory]" } else { "" }
        );
    }
    if let Some(dir) = &result.output_dir {
        println!("results in {}", dir.display());
    }
    if result.passed() || recipe.advisory {
        Ok(())
    } else {
        Err(Failure::User(format!("recipe {name} failed its checks")))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::User("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Internal(e.to_string()))?;
    }
    match cli.command {
        Command::Bench { kind } => cmd_bench(kind),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Curve(a) => cmd_curve(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Repro(a) => cmd_repro(a),
    }
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(Failure::User(m)) | Err(Failure::Internal(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("error: internal: {m}");
            ExitCode::from(2)
        }
    }
}
