//! Types shared by both search loops.

use crate::arch::Architecture;
use crate::aco::PheromoneGraph;
use crate::eval::{Dataset, EvalError, EvalRequest, FitnessReport};
use serde::{Deserialize, Serialize};
use std::io;
use thiserror::Error;

/// Where candidates are evaluated and how many evaluations may overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchContext {
    pub dataset: Dataset,
    pub subset_size: Option<u32>,
    pub workers: usize,
}

impl SearchContext {
    pub fn new(dataset: Dataset) -> Self {
        Self {
            dataset,
            subset_size: None,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_subset(mut self, subset_size: Option<u32>) -> Self {
        self.subset_size = subset_size;
        self
    }

    pub(crate) fn request(&self, architecture: Architecture, epochs: u32, seed: u64) -> EvalRequest {
        EvalRequest {
            architecture,
            epochs,
            dataset: self.dataset,
            subset_size: self.subset_size,
            seed,
        }
    }
}

/// One PSO iteration. `elapsed_s` is the cumulative evaluator-reported time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoRow {
    pub iteration: usize,
    pub best_loss: f64,
    pub best_acc: f64,
    pub mean_loss: f64,
    pub elapsed_s: f64,
}

/// One ACO depth round; `best_acc` is best-so-far across rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcoRow {
    pub depth: usize,
    pub best_acc: f64,
    pub mean_acc: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum History {
    Pso(Vec<PsoRow>),
    Aco(Vec<AcoRow>),
}

impl History {
    pub fn len(&self) -> usize {
        match self {
            History::Pso(rows) => rows.len(),
            History::Aco(rows) => rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Best-so-far accuracy after each iteration or depth round.
    pub fn best_accuracy(&self) -> Vec<f64> {
        match self {
            History::Pso(rows) => rows.iter().map(|r| r.best_acc).collect(),
            History::Aco(rows) => rows.iter().map(|r| r.best_acc).collect(),
        }
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        match self {
            History::Pso(rows) => {
                w.write_record(["iteration", "best_loss", "best_acc", "mean_loss", "elapsed_s"])?;
                for r in rows {
                    w.serialize(r)?;
                }
            }
            History::Aco(rows) => {
                w.write_record(["depth", "best_acc", "mean_acc", "elapsed_s"])?;
                for r in rows {
                    w.serialize(r)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: Architecture,
    /// Best candidate's report at the search budget.
    pub search_report: FitnessReport,
    /// Report of record: the long-budget retrain for PSO, the search report for ACO.
    pub final_report: FitnessReport,
    pub history: History,
    pub evaluations: usize,
    /// Wall time of the search loop, excluding any final retrain.
    pub search_seconds: f64,
    /// Wall time including the final retrain.
    pub total_seconds: f64,
    pub pheromones: Option<PheromoneGraph>,
}

#[derive(Debug, Error)]
#[error("search aborted after {evaluations} evaluations: {source}")]
pub struct SearchError {
    #[source]
    pub source: EvalError,
    pub history: History,
    pub evaluations: usize,
}

pub(crate) fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}
