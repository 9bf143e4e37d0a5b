//! Python bindings for `linmon`.
//!
//! ```python
//! import linmon
//! h = linmon.parse_history(open("h.json").read())
//! v = linmon.check(h)
//! v.linearizable, v.witness
//! ```

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use linmon::{AdtKind, Aux, Engine, Value};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A validated history of one concurrent object.
#[pyclass(name = "History", module = "linmon", frozen)]
pub struct PyHistory {
    inner: linmon::History,
}

#[pymethods]
impl PyHistory {
    /// Parses the JSON history format.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_history(text)
    }

    fn to_json(&self) -> String {
        linmon::serialize_history(&self.inner)
    }

    /// The object kind, e.g. "queue" or "priority-queue".
    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().name()
    }

    /// Concurrency width: the most operations overlapping at any time.
    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    /// Operations as `(id, method, value, aux, inv, res)` tuples. Values are
    /// integers or None for ε; times are strings such as "3" or "5/2".
    #[allow(clippy::type_complexity)]
    fn operations(&self) -> Vec<(String, &'static str, Option<i64>, Option<i64>, String, String)> {
        self.inner
            .ops()
            .iter()
            .map(|o| {
                let aux = match o.aux {
                    Some(Aux::Int(x)) => Some(x),
                    Some(Aux::Bool(b)) => Some(b as i64),
                    None => None,
                };
                let value = match o.value {
                    Value::Concrete(v) => Some(v),
                    _ => None,
                };
                (
                    o.id.clone(),
                    o.method.name(),
                    value,
                    aux,
                    o.inv.to_string(),
                    o.res.to_string(),
                )
            })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "<History {} n={} k={}>",
            self.inner.kind(),
            self.inner.len(),
            self.inner.width()
        )
    }
}

/// Outcome of a check; `witness` lists `(id, time)` in linearization order.
#[pyclass(name = "Verdict", module = "linmon", frozen)]
pub struct PyVerdict {
    #[pyo3(get)]
    linearizable: bool,
    #[pyo3(get)]
    witness: Option<Vec<(String, String)>>,
}

#[pymethods]
impl PyVerdict {
    fn __bool__(&self) -> bool {
        self.linearizable
    }

    fn __repr__(&self) -> String {
        format!("<Verdict linearizable={}>", self.linearizable)
    }
}

fn to_py(h: &linmon::History, v: linmon::Verdict) -> PyVerdict {
    PyVerdict {
        linearizable: v.linearizable,
        witness: v.witness.map(|w| {
            w.into_iter()
                .map(|e| (h.op(e.op).id.clone(), e.time.to_string()))
                .collect()
        }),
    }
}

#[pyfunction]
fn parse_history(text: &str) -> PyResult<PyHistory> {
    linmon::parse_history(text)
        .map(|inner| PyHistory { inner })
        .map_err(value_error)
}

/// Checks a history with the engine for its kind, or the named one
/// ("aadt", "stack", "queue", "oracle").
#[pyfunction]
#[pyo3(signature = (history, engine = None))]
fn check(history: &PyHistory, engine: Option<&str>) -> PyResult<PyVerdict> {
    let h = &history.inner;
    let engine = match engine {
        Some(name) => name.parse::<Engine>().map_err(value_error)?,
        None => Engine::for_kind(h.kind()),
    };
    let v = linmon::check_with(h, engine).map_err(value_error)?;
    Ok(to_py(h, v))
}

/// Brute-force check over every order; limited to small histories.
#[pyfunction]
fn oracle_check(history: &PyHistory) -> PyResult<PyVerdict> {
    let v = linmon::oracle_check(&history.inner).map_err(value_error)?;
    Ok(to_py(&history.inner, v))
}

#[pyfunction]
fn concurrency_width(history: &PyHistory) -> usize {
    linmon::concurrency_width(&history.inner)
}

#[pyfunction]
fn partition_state_count(history: &PyHistory) -> usize {
    linmon::count_partition_states(&history.inner)
}

/// The frontier graph as a DOT document.
#[pyfunction]
fn frontier_dot(history: &PyHistory) -> String {
    linmon::build_frontier_graph(&history.inner).to_dot(&history.inner)
}

/// A linearizable history of `n` operations with width at most `k`.
#[pyfunction]
fn generate(kind: &str, n: usize, k: usize, seed: u64) -> PyResult<PyHistory> {
    let kind: AdtKind = kind.parse().map_err(value_error)?;
    linmon::gen_history(kind, n, k, seed)
        .map(|inner| PyHistory { inner })
        .map_err(value_error)
}

/// One random mutation of a history, with a description of the change.
#[pyfunction]
fn mutate(history: &PyHistory, seed: u64) -> PyResult<(PyHistory, String)> {
    let (inner, desc) = linmon::mutate_history(&history.inner, seed).map_err(value_error)?;
    Ok((PyHistory { inner }, desc))
}

#[pymodule]
#[pyo3(name = "linmon")]
fn linmon_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHistory>()?;
    m.add_class::<PyVerdict>()?;
    m.add_function(wrap_pyfunction!(parse_history, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_check, m)?)?;
    m.add_function(wrap_pyfunction!(concurrency_width, m)?)?;
    m.add_function(wrap_pyfunction!(partition_state_count, m)?)?;
    m.add_function(wrap_pyfunction!(frontier_dot, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(mutate, m)?)?;
    Ok(())
}
