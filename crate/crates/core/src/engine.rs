//! Seeded multi-run experiments: config loading, evaluator construction and
//! run-directory persistence.
//!
//! Each run `r` of an experiment searches with seed `seed + r` and writes
//! `run_NNN/` under the output directory:
//!
//! ```text
//! config.toml      config snapshot, seed set to the run seed
//! history.csv      one row per iteration (PSO) or depth round (ACO)
//! best_arch.json   canonical document of the best architecture
//! summary.json     RunSummary
//! pheromones.json  final pheromone tables (ACO only)
//! ```

use crate::aco::{aco_run, AcoConfig};
use crate::arch::Architecture;
use crate::baseline::random_walk;
use crate::eval::{
    timeout_from_env, Dataset, Evaluator, ExternTrainer, FitnessReport, ParamBandSurrogate,
    TargetSurrogate,
};
use crate::pso::{pso_run, PsoConfig};
use crate::rng::substream;
use crate::search::{History, SearchContext, SearchResult};
use crate::space::{sample_random, SpaceConfig, SpaceError};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;
use thiserror::Error;

/// Seed of the hidden target behind `surrogate:target`. Fixed so that every
/// run of an experiment scores against the same landscape.
pub const TARGET_SEED: u64 = 0x7a26_e75e_ed00_0001;

/// Parameter count favoured by `surrogate:paramband` without an explicit center.
pub const DEFAULT_PARAM_CENTER: f64 = 1e5;

const PRESETS: [(&str, &str); 4] = [
    ("pso_a", include_str!("../presets/pso_a.toml")),
    ("pso_b", include_str!("../presets/pso_b.toml")),
    ("aco_a", include_str!("../presets/aco_a.toml")),
    ("aco_b", include_str!("../presets/aco_b.toml")),
];

/// Text of a shipped preset (`pso_a`, `pso_b`, `aco_a`, `aco_b`).
pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pso,
    Aco,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Pso => "pso",
            Algorithm::Aco => "aco",
        })
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}: {source}")]
    Invalid { origin: String, source: SpaceError },
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let start = e.span().map_or(0, |s| s.start).min(text.len());
        let before = &text[..start];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().unwrap_or("").chars().count() + 1;
        ConfigError::Parse {
            origin: origin.to_owned(),
            line,
            column,
            message: e.message().trim().to_owned(),
        }
    })
}

/// Reads `reference` as a preset name or else a file path.
fn read_reference(reference: &str) -> Result<(String, String), ConfigError> {
    if let Some(text) = preset_text(reference) {
        return Ok((text.to_owned(), reference.to_owned()));
    }
    let path = Path::new(reference);
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok((text, reference.to_owned()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchConfig {
    Pso(PsoConfig),
    Aco(AcoConfig),
}

impl SearchConfig {
    /// Parses and checks a TOML document mirroring the config's field names.
    pub fn parse(algorithm: Algorithm, text: &str, origin: &str) -> Result<Self, ConfigError> {
        let config = match algorithm {
            Algorithm::Pso => SearchConfig::Pso(parse_toml(text, origin)?),
            Algorithm::Aco => SearchConfig::Aco(parse_toml(text, origin)?),
        };
        config.check().map_err(|source| ConfigError::Invalid {
            origin: origin.to_owned(),
            source,
        })?;
        Ok(config)
    }

    /// Loads a shipped preset by name or a config file by path.
    pub fn load(algorithm: Algorithm, reference: &str) -> Result<Self, ConfigError> {
        let (text, origin) = read_reference(reference)?;
        Self::parse(algorithm, &text, &origin)
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            SearchConfig::Pso(_) => Algorithm::Pso,
            SearchConfig::Aco(_) => Algorithm::Aco,
        }
    }

    pub fn space(&self) -> &SpaceConfig {
        match self {
            SearchConfig::Pso(c) => &c.space,
            SearchConfig::Aco(c) => &c.space,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            SearchConfig::Pso(c) => c.seed,
            SearchConfig::Aco(c) => c.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            SearchConfig::Pso(c) => SearchConfig::Pso(PsoConfig { seed, ..c.clone() }),
            SearchConfig::Aco(c) => SearchConfig::Aco(AcoConfig { seed, ..c.clone() }),
        }
    }

    pub fn check(&self) -> Result<(), SpaceError> {
        match self {
            SearchConfig::Pso(c) => c.check(),
            SearchConfig::Aco(c) => c.check(),
        }
    }

    pub fn to_toml(&self) -> String {
        let text = match self {
            SearchConfig::Pso(c) => toml::to_string(c),
            SearchConfig::Aco(c) => toml::to_string(c),
        };
        text.expect("configs serialize to TOML")
    }

    /// Evaluator calls made by one complete run.
    pub fn evaluation_budget(&self) -> usize {
        match self {
            SearchConfig::Pso(c) => c.evaluation_budget(),
            SearchConfig::Aco(c) => c.evaluation_budget(),
        }
    }

    /// Layer count in the reporting convention: BatchNorm/Dropout expansions
    /// and the classifier head included. ACO candidates already carry their
    /// BatchNorm/Dropout layers explicitly.
    pub fn reported_layer_count(&self, best: &Architecture) -> usize {
        let hidden = match self {
            SearchConfig::Pso(c) => c.space.materialize(best).len(),
            SearchConfig::Aco(_) => best.len(),
        };
        hidden + 1
    }

    pub fn search(
        &self,
        evaluator: &dyn Evaluator,
        ctx: &SearchContext,
    ) -> Result<SearchResult, crate::SearchError> {
        match self {
            SearchConfig::Pso(c) => pso_run(c, evaluator, ctx),
            SearchConfig::Aco(c) => aco_run(c, evaluator, ctx),
        }
    }
}

/// Loads a search space from a preset or algorithm name (`pso`, `aco`), a
/// config file with a `[space]` table, or a bare space document.
pub fn load_space(reference: &str) -> Result<SpaceConfig, ConfigError> {
    let space = match reference {
        "pso" => SpaceConfig::pso_default(),
        "aco" => SpaceConfig::aco_default(),
        _ => {
            #[derive(Deserialize)]
            struct Wrapped {
                space: SpaceConfig,
            }
            let (text, origin) = read_reference(reference)?;
            let table: toml::Table = parse_toml(&text, &origin)?;
            if table.contains_key("space") {
                parse_toml::<Wrapped>(&text, &origin)?.space
            } else {
                parse_toml(&text, &origin)?
            }
        }
    };
    space.check().map_err(|source| ConfigError::Invalid {
        origin: reference.to_owned(),
        source,
    })?;
    Ok(space)
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid evaluator spec `{spec}`: {reason}")]
pub struct EvaluatorSpecError {
    pub spec: String,
    pub reason: String,
}

/// `surrogate:target[=<arch-file>]`, `surrogate:paramband[=<center>]` or
/// `extern:<command>`.
#[derive(Debug, Clone, PartialEq)]
pub enum EvaluatorSpec {
    Target { target: Option<PathBuf> },
    ParamBand { center: f64 },
    Extern { command: String },
}

impl EvaluatorSpec {
    pub fn is_surrogate(&self) -> bool {
        !matches!(self, EvaluatorSpec::Extern { .. })
    }
}

impl FromStr for EvaluatorSpec {
    type Err = EvaluatorSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| EvaluatorSpecError {
            spec: s.to_owned(),
            reason: reason.to_owned(),
        };
        if let Some(command) = s.strip_prefix("extern:") {
            if command.trim().is_empty() {
                return Err(err("missing trainer command"));
            }
            return Ok(EvaluatorSpec::Extern {
                command: command.to_owned(),
            });
        }
        let Some(rest) = s.strip_prefix("surrogate:") else {
            return Err(err("expected `surrogate:target`, `surrogate:paramband` or `extern:<command>`"));
        };
        let (name, arg) = match rest.split_once('=') {
            Some((n, a)) => (n, Some(a)),
            None => (rest, None),
        };
        match (name, arg) {
            ("target", None) => Ok(EvaluatorSpec::Target { target: None }),
            ("target", Some(path)) if !path.is_empty() => Ok(EvaluatorSpec::Target {
                target: Some(PathBuf::from(path)),
            }),
            ("paramband", None) => Ok(EvaluatorSpec::ParamBand {
                center: DEFAULT_PARAM_CENTER,
            }),
            ("paramband", Some(c)) => match c.parse::<f64>() {
                Ok(center) if center.is_finite() && center > 0.0 => {
                    Ok(EvaluatorSpec::ParamBand { center })
                }
                _ => Err(err("band center must be a positive number")),
            },
            _ => Err(err("unknown surrogate")),
        }
    }
}

impl fmt::Display for EvaluatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvaluatorSpec::Target { target: None } => f.write_str("surrogate:target"),
            EvaluatorSpec::Target { target: Some(p) } => {
                write!(f, "surrogate:target={}", p.display())
            }
            EvaluatorSpec::ParamBand { center } => write!(f, "surrogate:paramband={center}"),
            EvaluatorSpec::Extern { command } => write!(f, "extern:{command}"),
        }
    }
}

/// The architecture `surrogate:target` scores against when no target file is
/// given: a fixed-seed draw from the config's own space, so the optimum is
/// reachable by the search.
pub fn hidden_target(config: &SearchConfig, dataset: Dataset) -> Architecture {
    let mut rng = substream(TARGET_SEED, &[]);
    let shape = dataset.input_shape();
    let classes = dataset.num_classes();
    match config {
        SearchConfig::Pso(c) => sample_random(&c.space, shape, classes, &mut rng),
        SearchConfig::Aco(c) => random_walk(c, shape, classes, &mut rng),
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub evaluator: EvaluatorSpec,
    pub dataset: Dataset,
    pub subset_size: Option<u32>,
    pub runs: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Runs executed concurrently; above 1 only for surrogate evaluators.
    pub parallel_runs: usize,
    /// Concurrent evaluations within a run, further capped by the evaluator.
    pub workers: usize,
}

impl RunOptions {
    pub fn new(evaluator: EvaluatorSpec, out: impl Into<PathBuf>) -> Self {
        Self {
            evaluator,
            dataset: Dataset::FashionMnist,
            subset_size: None,
            runs: 1,
            seed: 0,
            out: out.into(),
            parallel_runs: 1,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub run: usize,
    pub seed: u64,
    pub evaluator: String,
    pub dataset: Dataset,
    pub subset_size: Option<u32>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub evaluations: usize,
    pub search_report: Option<FitnessReport>,
    /// Report of record; the retrain for PSO.
    pub final_report: Option<FitnessReport>,
    /// Includes the final retrain.
    pub wall_minutes: f64,
    pub search_wall_minutes: f64,
    pub layer_count: Option<usize>,
    /// Hidden layers as searched, before any expansion.
    pub raw_layers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub config: SearchConfig,
    pub summary: RunSummary,
    pub best: Option<Architecture>,
    pub history: History,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.summary.status == RunStatus::Ok
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Eval(#[from] crate::EvalError),
}

impl EngineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            EngineError::Config(_) | EngineError::Usage(_) => 2,
            EngineError::Io { .. } | EngineError::Eval(_) => 1,
        }
    }
}

fn write_file(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<(), EngineError> {
    fs::write(&path, contents).map_err(|source| EngineError::Io { path, source })
}

pub fn run_dir(out: &Path, run: usize) -> PathBuf {
    out.join(format!("run_{run:03}"))
}

/// Runs `options.runs` seeded searches, persisting each. A run whose
/// evaluator fails is recorded as failed; its siblings still run.
pub fn run_search(config: &SearchConfig, options: &RunOptions) -> Result<Vec<RunRecord>, EngineError> {
    config.check().map_err(|source| ConfigError::Invalid {
        origin: "config".into(),
        source,
    })?;
    if options.runs == 0 {
        return Err(EngineError::Usage("--runs must be at least 1".into()));
    }
    if options.parallel_runs > 1 && !options.evaluator.is_surrogate() {
        return Err(EngineError::Usage(
            "--parallel-runs is only allowed with surrogate evaluators".into(),
        ));
    }
    let target = resolve_target(config, &options.evaluator, options.dataset)?;
    fs::create_dir_all(&options.out).map_err(|source| EngineError::Io {
        path: options.out.clone(),
        source,
    })?;

    let threads = options.parallel_runs.clamp(1, options.runs);
    if threads == 1 {
        return (0..options.runs)
            .map(|r| execute_run(config, options, target.as_ref(), r))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunRecord, EngineError>>>> =
        (0..options.runs).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let r = next.fetch_add(1, Ordering::Relaxed);
                if r >= options.runs {
                    break;
                }
                let record = execute_run(config, options, target.as_ref(), r);
                *slots[r].lock().unwrap() = Some(record);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every run executed"))
        .collect()
}

/// The architecture a `surrogate:target` spec scores against; `None` for
/// other evaluators.
fn resolve_target(
    config: &SearchConfig,
    spec: &EvaluatorSpec,
    dataset: Dataset,
) -> Result<Option<Architecture>, EngineError> {
    Ok(match spec {
        EvaluatorSpec::Target { target: Some(path) } => {
            let doc = fs::read_to_string(path).map_err(|e| {
                EngineError::Usage(format!("cannot read target {}: {e}", path.display()))
            })?;
            let arch = Architecture::from_document(&doc).map_err(|e| {
                EngineError::Usage(format!("bad target {}: {e}", path.display()))
            })?;
            Some(arch)
        }
        EvaluatorSpec::Target { target: None } => Some(hidden_target(config, dataset)),
        _ => None,
    })
}

/// Builds the evaluator `spec` describes for one search with `config`.
/// External trainers are spawned here and receive materialized
/// architectures for PSO.
pub fn make_evaluator(
    config: &SearchConfig,
    spec: &EvaluatorSpec,
    dataset: Dataset,
) -> Result<Box<dyn Evaluator>, EngineError> {
    let target = resolve_target(config, spec, dataset)?;
    Ok(build_evaluator(config, spec, target.as_ref())?)
}

fn build_evaluator(
    config: &SearchConfig,
    spec: &EvaluatorSpec,
    target: Option<&Architecture>,
) -> Result<Box<dyn Evaluator>, crate::EvalError> {
    Ok(match spec {
        EvaluatorSpec::Target { .. } => Box::new(TargetSurrogate::new(
            target.expect("target resolved before the runs").clone(),
        )),
        EvaluatorSpec::ParamBand { center } => Box::new(ParamBandSurrogate::new(*center)),
        EvaluatorSpec::Extern { command } => {
            let trainer = ExternTrainer::spawn(command, timeout_from_env())?;
            match config {
                SearchConfig::Pso(c) => Box::new(trainer.with_materialization(
                    c.space.batch_norm_enabled,
                    Some(c.space.dropout_rate_default),
                )),
                SearchConfig::Aco(_) => Box::new(trainer),
            }
        }
    })
}

fn execute_run(
    config: &SearchConfig,
    options: &RunOptions,
    target: Option<&Architecture>,
    run: usize,
) -> Result<RunRecord, EngineError> {
    let started = Instant::now();
    let seed = options.seed.wrapping_add(run as u64);
    let config = config.with_seed(seed);
    let ctx = SearchContext::new(options.dataset)
        .with_subset(options.subset_size)
        .with_workers(options.workers);
    let dir = run_dir(&options.out, run);
    fs::create_dir_all(&dir).map_err(|source| EngineError::Io {
        path: dir.clone(),
        source,
    })?;
    write_file(dir.join("config.toml"), config.to_toml())?;

    let outcome = build_evaluator(&config, &options.evaluator, target)
        .map_err(|source| (source, empty_history(&config), 0))
        .and_then(|evaluator| {
            config
                .search(evaluator.as_ref(), &ctx)
                .map_err(|e| (e.source, e.history, e.evaluations))
        });

    let mut summary = RunSummary {
        algorithm: config.algorithm(),
        run,
        seed,
        evaluator: options.evaluator.to_string(),
        dataset: options.dataset,
        subset_size: options.subset_size,
        status: RunStatus::Ok,
        error: None,
        evaluations: 0,
        search_report: None,
        final_report: None,
        wall_minutes: 0.0,
        search_wall_minutes: 0.0,
        layer_count: None,
        raw_layers: None,
    };
    let (best, history) = match outcome {
        Ok(result) => {
            summary.evaluations = result.evaluations;
            summary.search_report = Some(result.search_report);
            summary.final_report = Some(result.final_report);
            summary.wall_minutes = result.total_seconds / 60.0;
            summary.search_wall_minutes = result.search_seconds / 60.0;
            summary.layer_count = Some(config.reported_layer_count(&result.best));
            summary.raw_layers = Some(result.best.len());
            let mut doc = result.best.to_document();
            doc.push('\n');
            write_file(dir.join("best_arch.json"), doc)?;
            if let Some(graph) = &result.pheromones {
                write_file(dir.join("pheromones.json"), graph.to_document())?;
            }
            (Some(result.best), result.history)
        }
        Err((error, history, evaluations)) => {
            let minutes = started.elapsed().as_secs_f64() / 60.0;
            summary.status = RunStatus::Failed;
            summary.error = Some(match &error {
                crate::EvalError::Failure { message, diagnostics } if !diagnostics.is_empty() => {
                    format!("{error}\n{}", diagnostics.trim_end())
                }
                _ => error.to_string(),
            });
            summary.evaluations = evaluations;
            summary.wall_minutes = minutes;
            summary.search_wall_minutes = minutes;
            let _ = fs::remove_file(dir.join("best_arch.json"));
            (None, history)
        }
    };
    write_file(dir.join("history.csv"), history.to_csv())?;
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(dir.join("summary.json"), json + "\n")?;
    Ok(RunRecord {
        dir,
        config,
        summary,
        best,
        history,
    })
}

fn empty_history(config: &SearchConfig) -> History {
    match config {
        SearchConfig::Pso(_) => History::Pso(Vec::new()),
        SearchConfig::Aco(_) => History::Aco(Vec::new()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_builtin_configs() {
        let load = |a, n| SearchConfig::load(a, n).unwrap();
        assert_eq!(load(Algorithm::Pso, "pso_a"), SearchConfig::Pso(PsoConfig::preset_a()));
        assert_eq!(load(Algorithm::Pso, "pso_b"), SearchConfig::Pso(PsoConfig::preset_b()));
        assert_eq!(load(Algorithm::Aco, "aco_a"), SearchConfig::Aco(AcoConfig::preset_a()));
        assert_eq!(load(Algorithm::Aco, "aco_b"), SearchConfig::Aco(AcoConfig::preset_b()));
    }

    #[test]
    fn config_snapshot_round_trips() {
        for name in preset_names() {
            let algorithm = if name.starts_with("pso") {
                Algorithm::Pso
            } else {
                Algorithm::Aco
            };
            let config = SearchConfig::load(algorithm, name).unwrap().with_seed(17);
            let back = SearchConfig::parse(algorithm, &config.to_toml(), "snapshot").unwrap();
            assert_eq!(back, config);
        }
    }

    #[test]
    fn parse_errors_carry_line_and_column() {
        let text = "swarm_size = 10\niterations = 20\ncg = \"half\"\n";
        match SearchConfig::parse(Algorithm::Pso, text, "bad.toml") {
            Err(ConfigError::Parse { origin, line, column, .. }) => {
                assert_eq!(origin, "bad.toml");
                assert_eq!((line, column), (3, 6));
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
        let text = "ants = 8\nepochs_candidate = 30\nmax_depth = 20\ngreediness = 0.5\nbogus = 1\n";
        match SearchConfig::parse(Algorithm::Aco, text, "x.toml") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_values_are_rejected_after_parsing() {
        let text = preset_text("pso_b").unwrap().replace("cg = 0.5", "cg = 1.5");
        assert!(matches!(
            SearchConfig::parse(Algorithm::Pso, &text, "p"),
            Err(ConfigError::Invalid { .. })
        ));
    }

    #[test]
    fn evaluator_specs() {
        let parse = |s: &str| s.parse::<EvaluatorSpec>();
        assert_eq!(parse("surrogate:target").unwrap(), EvaluatorSpec::Target { target: None });
        assert_eq!(
            parse("surrogate:target=t.json").unwrap(),
            EvaluatorSpec::Target {
                target: Some("t.json".into())
            }
        );
        assert_eq!(
            parse("surrogate:paramband").unwrap(),
            EvaluatorSpec::ParamBand {
                center: DEFAULT_PARAM_CENTER
            }
        );
        assert_eq!(
            parse("surrogate:paramband=5e4").unwrap(),
            EvaluatorSpec::ParamBand { center: 5e4 }
        );
        assert_eq!(
            parse("extern:python3 -m backend").unwrap(),
            EvaluatorSpec::Extern {
                command: "python3 -m backend".into()
            }
        );
        for bad in ["", "surrogate", "surrogate:oracle", "surrogate:paramband=-1", "extern:", "local:x"] {
            assert!(parse(bad).is_err(), "{bad}");
        }
        for good in ["surrogate:target", "surrogate:paramband=50000", "extern:sh x"] {
            assert_eq!(parse(good).unwrap().to_string(), good);
        }
    }

    #[test]
    fn hidden_targets_lie_in_their_space() {
        for name in preset_names() {
            let algorithm = if name.starts_with("pso") {
                Algorithm::Pso
            } else {
                Algorithm::Aco
            };
            let config = SearchConfig::load(algorithm, name).unwrap();
            let target = hidden_target(&config, Dataset::Cifar10);
            assert!(crate::validate(&target, config.space()).valid, "{name}");
        }
    }

    #[test]
    fn layer_count_convention() {
        use crate::arch::{LayerSpec, Shape};
        let arch = Architecture::new(
            Shape::new(28, 28, 1),
            10,
            vec![LayerSpec::conv(8, 3), LayerSpec::MaxPool, LayerSpec::fc(64)],
        );
        // conv, bn, pool, fc, dropout, head
        let pso = SearchConfig::Pso(PsoConfig::preset_b());
        assert_eq!(pso.reported_layer_count(&arch), 6);
        let aco = SearchConfig::Aco(AcoConfig::preset_a());
        assert_eq!(aco.reported_layer_count(&arch), 4);
    }
}
