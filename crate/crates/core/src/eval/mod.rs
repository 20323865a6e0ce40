//! Fitness evaluation contract and its implementations.

mod protocol;
mod surrogate;
mod trainer;

pub use protocol::{Hello, WireRequest, WireResponse};
pub use surrogate::{target_distance, ParamBandSurrogate, TargetSurrogate};
pub use trainer::{timeout_from_env, ExternTrainer, DEFAULT_TIMEOUT_S, TIMEOUT_ENV};

use crate::arch::{Architecture, Shape};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    FashionMnist,
    Cifar10,
    Synthetic,
}

impl Dataset {
    pub fn input_shape(self) -> Shape {
        match self {
            Dataset::FashionMnist | Dataset::Synthetic => Shape::new(28, 28, 1),
            Dataset::Cifar10 => Shape::new(32, 32, 3),
        }
    }

    pub fn num_classes(self) -> u32 {
        10
    }

    pub fn name(self) -> &'static str {
        match self {
            Dataset::FashionMnist => "fashion_mnist",
            Dataset::Cifar10 => "cifar10",
            Dataset::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fashion_mnist" => Ok(Dataset::FashionMnist),
            "cifar10" => Ok(Dataset::Cifar10),
            "synthetic" => Ok(Dataset::Synthetic),
            other => Err(EvalError::UnknownDataset(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRequest {
    pub architecture: Architecture,
    pub epochs: u32,
    pub dataset: Dataset,
    pub subset_size: Option<u32>,
    pub seed: u64,
}

/// Outcome of evaluating one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub val_accuracy: f64,
    /// Cross-entropy on the validation split (surrogates: `1 - val_accuracy`).
    pub val_loss: f64,
    pub wall_seconds: f64,
    pub param_count: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("evaluator failure: {message}")]
    Failure { message: String, diagnostics: String },
    #[error("evaluator timed out after {seconds}s")]
    Timeout { seconds: u64 },
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl EvalError {
    pub fn failure(message: impl Into<String>) -> Self {
        EvalError::Failure {
            message: message.into(),
            diagnostics: String::new(),
        }
    }
}

pub trait Evaluator: Send + Sync {
    fn evaluate(&self, request: &EvalRequest) -> Result<FitnessReport, EvalError>;

    /// Upper bound on concurrent `evaluate` calls.
    fn max_parallelism(&self) -> usize {
        usize::MAX
    }
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn evaluate(&self, request: &EvalRequest) -> Result<FitnessReport, EvalError> {
        (**self).evaluate(request)
    }

    fn max_parallelism(&self) -> usize {
        (**self).max_parallelism()
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn evaluate(&self, request: &EvalRequest) -> Result<FitnessReport, EvalError> {
        (**self).evaluate(request)
    }

    fn max_parallelism(&self) -> usize {
        (**self).max_parallelism()
    }
}

/// Evaluates `requests`, returning results in request order. At most
/// `min(workers, evaluator.max_parallelism())` calls run at once.
pub fn evaluate_all<E: Evaluator + ?Sized>(
    evaluator: &E,
    requests: &[EvalRequest],
    workers: usize,
) -> Vec<Result<FitnessReport, EvalError>> {
    let workers = workers
        .min(evaluator.max_parallelism())
        .min(requests.len())
        .max(1);
    if workers == 1 {
        return requests.iter().map(|r| evaluator.evaluate(r)).collect();
    }

    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<FitnessReport, EvalError>>>> =
        requests.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(request) = requests.get(i) else { break };
                let result = evaluator.evaluate(request);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every request evaluated"))
        .collect()
}

/// Wraps an evaluator and records every call it forwards.
pub struct CountingEvaluator<E> {
    inner: E,
    calls: AtomicUsize,
    epochs: Mutex<Vec<u32>>,
}

impl<E: Evaluator> CountingEvaluator<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
            epochs: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Epoch budgets of all calls, in arrival order.
    pub fn epochs(&self) -> Vec<u32> {
        self.epochs.lock().unwrap().clone()
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Evaluator> Evaluator for CountingEvaluator<E> {
    fn evaluate(&self, request: &EvalRequest) -> Result<FitnessReport, EvalError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.epochs.lock().unwrap().push(request.epochs);
        self.inner.evaluate(request)
    }

    fn max_parallelism(&self) -> usize {
        self.inner.max_parallelism()
    }
}
