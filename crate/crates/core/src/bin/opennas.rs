use clap::{Args, Parser, Subcommand};
use opennas::engine::{self, Algorithm, EvaluatorSpec, RunOptions, SearchConfig};
use opennas::rng::substream;
use opennas::stats::{self, StatsRow};
use opennas::{sample_random, validate, Architecture, Dataset, Shape};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Swarm-intelligence neural architecture search.
#[derive(Parser)]
#[command(name = "opennas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Particle swarm search.
    Pso(SearchArgs),
    /// Ant colony search.
    Aco(SearchArgs),
    /// Aggregate statistics over run directories (or experiment directories
    /// holding run_* subdirectories).
    Stats {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Print the row as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Check an architecture document against a search space.
    Validate {
        arch: PathBuf,
        /// Preset name, `pso`, `aco`, or a config/space file.
        #[arg(long, default_value = "pso")]
        space: String,
    },
    /// Print a random architecture document drawn from a space.
    Randarch {
        #[arg(long, default_value = "pso")]
        space: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "fashion_mnist")]
        dataset: Dataset,
    },
    /// Print the output shape after each layer.
    Shapes {
        arch: PathBuf,
        /// Override the document's input shape, as HxWxC.
        #[arg(long)]
        input: Option<Shape>,
    },
}

#[derive(Args)]
struct SearchArgs {
    /// Preset name (pso_a, pso_b, aco_a, aco_b) or TOML config file.
    #[arg(long)]
    config: String,
    /// surrogate:target[=FILE], surrogate:paramband[=CENTER] or extern:COMMAND
    #[arg(long)]
    evaluator: EvaluatorSpec,
    #[arg(long, default_value = "fashion_mnist")]
    dataset: Dataset,
    /// Train on the first N samples only.
    #[arg(long)]
    subset_size: Option<u32>,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Run r uses seed + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Concurrent runs; surrogate evaluators only.
    #[arg(long, default_value_t = 1)]
    parallel_runs: usize,
    /// Concurrent evaluations within a run.
    #[arg(long)]
    workers: Option<usize>,
}

const DOMAIN_FAILURE: u8 = 1;
const USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Pso(args) => search(Algorithm::Pso, args),
        Command::Aco(args) => search(Algorithm::Aco, args),
        Command::Stats { dirs, json } => stats_cmd(&dirs, json),
        Command::Validate { arch, space } => validate_cmd(&arch, &space),
        Command::Randarch {
            space,
            seed,
            dataset,
        } => randarch(&space, seed, dataset),
        Command::Shapes { arch, input } => shapes(&arch, input),
    }
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("opennas: {message}");
    ExitCode::from(code)
}

fn search(algorithm: Algorithm, args: SearchArgs) -> ExitCode {
    let config = match SearchConfig::load(algorithm, &args.config) {
        Ok(c) => c,
        Err(e) => return fail(USAGE, e),
    };
    let mut options = RunOptions::new(args.evaluator, &args.out);
    options.dataset = args.dataset;
    options.subset_size = args.subset_size;
    options.runs = args.runs;
    options.seed = args.seed;
    options.parallel_runs = args.parallel_runs;
    if let Some(w) = args.workers {
        options.workers = w.max(1);
    }
    let records = match engine::run_search(&config, &options) {
        Ok(r) => r,
        Err(e) => return fail(e.exit_code() as u8, e),
    };

    let mut failed = 0;
    for record in &records {
        let s = &record.summary;
        match &s.final_report {
            Some(report) if record.succeeded() => println!(
                "{}  seed {}  acc {:.4}  loss {:.4}  evals {}  layers {}",
                record.dir.display(),
                s.seed,
                report.val_accuracy,
                report.val_loss,
                s.evaluations,
                s.layer_count.unwrap_or_default(),
            ),
            _ => {
                failed += 1;
                println!("{}  seed {}  FAILED", record.dir.display(), s.seed);
                if let Some(e) = &s.error {
                    eprintln!("{e}");
                }
            }
        }
    }
    match stats::aggregate_records(&records) {
        Ok(row) => {
            println!("{}", StatsRow::HEADER);
            println!("{}", row.format_row());
            let json = serde_json::to_string_pretty(&row).expect("stats serialize") + "\n";
            let path = args.out.join("stats.json");
            if let Err(e) = fs::write(&path, json) {
                return fail(DOMAIN_FAILURE, format!("{}: {e}", path.display()));
            }
        }
        Err(e) => eprintln!("opennas: {e}"),
    }
    if failed > 0 {
        ExitCode::from(DOMAIN_FAILURE)
    } else {
        ExitCode::SUCCESS
    }
}

/// Expands experiment directories into their run_* subdirectories.
fn run_dirs(dirs: &[PathBuf]) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for dir in dirs {
        if dir.join("summary.json").exists() {
            out.push(dir.clone());
            continue;
        }
        let mut runs: Vec<PathBuf> = fs::read_dir(dir)
            .into_iter()
            .flatten()
            .flatten()
            .map(|e| e.path())
            .filter(|p| p.join("summary.json").exists())
            .collect();
        if runs.is_empty() {
            // Let aggregation report the missing summary.
            out.push(dir.clone());
        }
        runs.sort();
        out.extend(runs);
    }
    out
}

fn stats_cmd(dirs: &[PathBuf], json: bool) -> ExitCode {
    match stats::aggregate_stats(&run_dirs(dirs)) {
        Ok(row) if json => {
            println!("{}", serde_json::to_string_pretty(&row).expect("stats serialize"));
            ExitCode::SUCCESS
        }
        Ok(row) => {
            println!("{}", StatsRow::HEADER);
            println!("{}", row.format_row());
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.exit_code() as u8, e),
    }
}

fn read_arch(path: &Path) -> Result<Architecture, ExitCode> {
    let doc = fs::read_to_string(path)
        .map_err(|e| fail(USAGE, format!("{}: {e}", path.display())))?;
    Architecture::from_document(&doc)
        .map_err(|e| fail(DOMAIN_FAILURE, format!("{}: {e}", path.display())))
}

fn validate_cmd(path: &Path, space: &str) -> ExitCode {
    let space = match engine::load_space(space) {
        Ok(s) => s,
        Err(e) => return fail(USAGE, e),
    };
    let arch = match read_arch(path) {
        Ok(a) => a,
        Err(code) => return code,
    };
    let report = validate(&arch, &space);
    if report.valid {
        println!("valid");
        return ExitCode::SUCCESS;
    }
    println!("invalid: {} violation(s)", report.violations.len());
    for v in &report.violations {
        match v.layer_index {
            Some(i) => println!("  {} (layer {i}): {}", v.rule, v.message),
            None => println!("  {}: {}", v.rule, v.message),
        }
    }
    ExitCode::from(DOMAIN_FAILURE)
}

fn randarch(space: &str, seed: u64, dataset: Dataset) -> ExitCode {
    let space = match engine::load_space(space) {
        Ok(s) => s,
        Err(e) => return fail(USAGE, e),
    };
    let mut rng = substream(seed, &[]);
    let arch = sample_random(&space, dataset.input_shape(), dataset.num_classes(), &mut rng);
    println!("{}", arch.to_document());
    ExitCode::SUCCESS
}

fn shapes(path: &Path, input: Option<Shape>) -> ExitCode {
    let mut arch = match read_arch(path) {
        Ok(a) => a,
        Err(code) => return code,
    };
    if let Some(shape) = input {
        arch.input_shape = shape;
    }
    match arch.shape_infer() {
        Ok(trace) => {
            let shapes: Vec<String> = trace.layers.iter().map(|s| s.to_string()).collect();
            println!("{}", shapes.join(","));
            ExitCode::SUCCESS
        }
        Err(e) => fail(DOMAIN_FAILURE, e),
    }
}
