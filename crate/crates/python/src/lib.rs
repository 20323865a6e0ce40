//! Python bindings: architecture documents, validation, random sampling,
//! single searches and run statistics.

use opennas::engine::{self, make_evaluator, Algorithm, EngineError, EvaluatorSpec, SearchConfig};
use opennas::rng::substream;
use opennas::stats;
use opennas::{Architecture, Dataset, History, SearchContext};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn engine_error(e: EngineError) -> PyErr {
    match e.exit_code() {
        2 => value_error(e),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn dataset(name: &str) -> PyResult<Dataset> {
    name.parse().map_err(value_error)
}

/// A sequential CNN layer stack in canonical document form.
#[pyclass(name = "Architecture", module = "opennas", eq, frozen, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyArchitecture {
    inner: Architecture,
}

#[pymethods]
impl PyArchitecture {
    #[staticmethod]
    fn from_document(doc: &str) -> PyResult<Self> {
        Architecture::from_document(doc)
            .map(|inner| Self { inner })
            .map_err(value_error)
    }

    fn to_document(&self) -> String {
        self.inner.to_document()
    }

    /// Trainable parameters, classifier head included.
    fn param_count(&self) -> PyResult<u64> {
        self.inner.param_count().map_err(value_error)
    }

    /// Output shape `(height, width, channels)` after each layer.
    fn shapes(&self) -> PyResult<Vec<(u32, u32, u32)>> {
        let trace = self.inner.shape_infer().map_err(value_error)?;
        Ok(trace
            .layers
            .iter()
            .map(|s| (s.height, s.width, s.channels))
            .collect())
    }

    /// Violations against a space (`pso`, `aco`, a preset name or a file)
    /// as `(rule, layer_index, message)`; empty when valid.
    #[pyo3(signature = (space = "pso"))]
    fn validate(&self, space: &str) -> PyResult<Vec<(String, Option<usize>, String)>> {
        let space = engine::load_space(space).map_err(value_error)?;
        Ok(opennas::validate(&self.inner, &space)
            .violations
            .into_iter()
            .map(|v| (v.rule.to_string(), v.layer_index, v.message))
            .collect())
    }

    #[pyo3(signature = (batch_norm = true, dropout_rate = Some(0.5)))]
    fn materialize(&self, batch_norm: bool, dropout_rate: Option<f64>) -> Self {
        Self {
            inner: self.inner.materialize(batch_norm, dropout_rate),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Architecture({})", self.inner.to_document())
    }
}

/// Draws a random architecture from a space.
#[pyfunction]
#[pyo3(signature = (space = "pso", seed = 0, dataset = "fashion_mnist"))]
fn sample_random(space: &str, seed: u64, dataset: &str) -> PyResult<PyArchitecture> {
    let space = engine::load_space(space).map_err(value_error)?;
    let d = self::dataset(dataset)?;
    let inner = opennas::sample_random(&space, d.input_shape(), d.num_classes(), &mut substream(seed, &[]));
    Ok(PyArchitecture { inner })
}

fn history_rows<'py>(py: Python<'py>, history: &History) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut rows = Vec::with_capacity(history.len());
    match history {
        History::Pso(items) => {
            for r in items {
                let d = PyDict::new(py);
                d.set_item("iteration", r.iteration)?;
                d.set_item("best_loss", r.best_loss)?;
                d.set_item("best_acc", r.best_acc)?;
                d.set_item("mean_loss", r.mean_loss)?;
                d.set_item("elapsed_s", r.elapsed_s)?;
                rows.push(d);
            }
        }
        History::Aco(items) => {
            for r in items {
                let d = PyDict::new(py);
                d.set_item("depth", r.depth)?;
                d.set_item("best_acc", r.best_acc)?;
                d.set_item("mean_acc", r.mean_acc)?;
                d.set_item("elapsed_s", r.elapsed_s)?;
                rows.push(d);
            }
        }
    }
    Ok(rows)
}

fn run<'py>(
    py: Python<'py>,
    algorithm: Algorithm,
    config: &str,
    evaluator: &str,
    seed: u64,
    dataset: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let config = SearchConfig::load(algorithm, config)
        .map_err(value_error)?
        .with_seed(seed);
    let spec: EvaluatorSpec = evaluator.parse().map_err(value_error)?;
    let d = self::dataset(dataset)?;
    let ctx = SearchContext::new(d);
    let result = py
        .detach(|| {
            let evaluator = make_evaluator(&config, &spec, d)?;
            config
                .search(evaluator.as_ref(), &ctx)
                .map_err(|e| EngineError::Eval(e.source))
        })
        .map_err(engine_error)?;

    let out = PyDict::new(py);
    out.set_item("layer_count", config.reported_layer_count(&result.best))?;
    out.set_item("best", PyArchitecture { inner: result.best })?;
    out.set_item("val_accuracy", result.final_report.val_accuracy)?;
    out.set_item("val_loss", result.final_report.val_loss)?;
    out.set_item("evaluations", result.evaluations)?;
    out.set_item("history", history_rows(py, &result.history)?)?;
    Ok(out)
}

/// One particle swarm search; returns best architecture, final report
/// fields and history rows.
#[pyfunction]
#[pyo3(signature = (config = "pso_b", evaluator = "surrogate:target", seed = 0, dataset = "fashion_mnist"))]
fn run_pso<'py>(
    py: Python<'py>,
    config: &str,
    evaluator: &str,
    seed: u64,
    dataset: &str,
) -> PyResult<Bound<'py, PyDict>> {
    run(py, Algorithm::Pso, config, evaluator, seed, dataset)
}

/// One ant colony search; same result layout as `run_pso`.
#[pyfunction]
#[pyo3(signature = (config = "aco_a", evaluator = "surrogate:target", seed = 0, dataset = "fashion_mnist"))]
fn run_aco<'py>(
    py: Python<'py>,
    config: &str,
    evaluator: &str,
    seed: u64,
    dataset: &str,
) -> PyResult<Bound<'py, PyDict>> {
    run(py, Algorithm::Aco, config, evaluator, seed, dataset)
}

/// Statistics over persisted run directories.
#[pyfunction]
fn aggregate_stats<'py>(py: Python<'py>, dirs: Vec<String>) -> PyResult<Bound<'py, PyDict>> {
    let row = stats::aggregate_stats(&dirs).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("runs", row.runs)?;
    out.set_item("acc_max", row.acc_max)?;
    out.set_item("acc_mean", row.acc_mean)?;
    out.set_item("acc_stdev", row.acc_stdev)?;
    out.set_item("time_mean_minutes", row.time_mean_minutes)?;
    out.set_item("layers_of_best", row.layers_of_best)?;
    out.set_item("row", row.format_row())?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "opennas")]
fn opennas_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyArchitecture>()?;
    m.add_function(wrap_pyfunction!(sample_random, m)?)?;
    m.add_function(wrap_pyfunction!(run_pso, m)?)?;
    m.add_function(wrap_pyfunction!(run_aco, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_stats, m)?)?;
    Ok(())
}
