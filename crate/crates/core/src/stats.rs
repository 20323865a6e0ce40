//! Aggregate statistics over completed runs, in the reporting-table layout
//! `acc_max  acc_mean  acc_stdev  time_min  layers`.

use crate::engine::{Algorithm, RunRecord, RunStatus, RunSummary, SearchConfig};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// What one successful run contributes to the statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub accuracy: f64,
    pub wall_minutes: f64,
    pub layer_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub runs: usize,
    pub acc_max: f64,
    pub acc_mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub acc_stdev: f64,
    pub time_mean_minutes: f64,
    pub layers_of_best: usize,
}

impl StatsRow {
    pub const HEADER: &'static str = "acc_max  acc_mean  acc_stdev  time_min  layers";

    /// `None` for an empty slice. The best run is the most accurate, earliest
    /// on ties.
    pub fn from_outcomes(outcomes: &[RunOutcome]) -> Option<Self> {
        let best = outcomes
            .iter()
            .reduce(|best, o| if o.accuracy > best.accuracy { o } else { best })?;
        let accs: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
        let acc_mean = mean(&accs);
        Some(Self {
            runs: outcomes.len(),
            acc_max: best.accuracy,
            acc_mean,
            acc_stdev: sample_stdev(&accs, acc_mean),
            time_mean_minutes: mean(&outcomes.iter().map(|o| o.wall_minutes).collect::<Vec<_>>()),
            layers_of_best: best.layer_count,
        })
    }

    /// `0.900  0.853  0.044  1316  30`
    pub fn format_row(&self) -> String {
        format!(
            "{:.3}  {:.3}  {:.3}  {:.0}  {}",
            self.acc_max, self.acc_mean, self.acc_stdev, self.time_mean_minutes, self.layers_of_best
        )
    }
}

/// Neumaier-compensated sum, so that e.g. the mean of 0.9, 0.8, 0.85 comes
/// out as 0.85 rather than 0.8500000000000001.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values) / values.len() as f64
}

pub fn sample_stdev(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (compensated_sum(&squares) / (values.len() - 1) as f64).sqrt()
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no run directories given")]
    Empty,
    #[error("{}: {message}", path.display())]
    Unreadable { path: PathBuf, message: String },
    #[error("{}: {message}", path.display())]
    Mismatch { path: PathBuf, message: String },
    #[error("none of the {0} runs succeeded")]
    NoSuccessfulRuns(usize),
}

impl StatsError {
    pub fn exit_code(&self) -> i32 {
        match self {
            StatsError::NoSuccessfulRuns(_) => 1,
            _ => 2,
        }
    }
}

fn outcome(summary: &RunSummary) -> Option<RunOutcome> {
    if summary.status != RunStatus::Ok {
        return None;
    }
    Some(RunOutcome {
        accuracy: summary.final_report.as_ref()?.val_accuracy,
        wall_minutes: summary.wall_minutes,
        layer_count: summary.layer_count?,
    })
}

fn aggregate<'a>(
    runs: impl IntoIterator<Item = (&'a Path, &'a RunSummary, &'a SearchConfig)>,
) -> Result<StatsRow, StatsError> {
    let mut reference: Option<(Algorithm, SearchConfig)> = None;
    let mut outcomes = Vec::new();
    let mut total = 0;
    for (path, summary, config) in runs {
        total += 1;
        let unseeded = config.with_seed(0);
        match &reference {
            None => reference = Some((summary.algorithm, unseeded)),
            Some((algorithm, first)) => {
                if *algorithm != summary.algorithm || *first != unseeded {
                    return Err(StatsError::Mismatch {
                        path: path.to_owned(),
                        message: "runs differ in algorithm or config".into(),
                    });
                }
            }
        }
        outcomes.extend(outcome(summary));
    }
    if total == 0 {
        return Err(StatsError::Empty);
    }
    StatsRow::from_outcomes(&outcomes).ok_or(StatsError::NoSuccessfulRuns(total))
}

/// Statistics over in-memory records; failed runs are skipped.
pub fn aggregate_records(records: &[RunRecord]) -> Result<StatsRow, StatsError> {
    aggregate(
        records
            .iter()
            .map(|r| (r.dir.as_path(), &r.summary, &r.config)),
    )
}

/// Reads a run directory's summary and config snapshot.
pub fn read_run(dir: &Path) -> Result<(RunSummary, SearchConfig), StatsError> {
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|e| StatsError::Unreadable {
            path,
            message: e.to_string(),
        })
    };
    let summary: RunSummary =
        serde_json::from_str(&read("summary.json")?).map_err(|e| StatsError::Unreadable {
            path: dir.join("summary.json"),
            message: e.to_string(),
        })?;
    let config = SearchConfig::parse(summary.algorithm, &read("config.toml")?, "config.toml")
        .map_err(|e| StatsError::Unreadable {
            path: dir.join("config.toml"),
            message: e.to_string(),
        })?;
    Ok((summary, config))
}

/// Statistics over persisted run directories; reproduces
/// [`aggregate_records`] bit for bit.
pub fn aggregate_stats<P: AsRef<Path>>(dirs: &[P]) -> Result<StatsRow, StatsError> {
    if dirs.is_empty() {
        return Err(StatsError::Empty);
    }
    let runs = dirs
        .iter()
        .map(|d| read_run(d.as_ref()).map(|(s, c)| (d.as_ref(), s, c)))
        .collect::<Result<Vec<_>, _>>()?;
    aggregate(runs.iter().map(|(p, s, c)| (*p, s, c)))
}
