//! Python bindings.
//!
//! The module exposes parsing, DPOR exploration, the brute-force oracle and
//! the JSON trace format. Everything crossing the boundary is plain data;
//! models are passed as the strings `"ccv"` and `"cc"`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use txcheck::cli::{self, RunConfig, Verdict};
use txcheck::oracle;
use txcheck::trace::TraceDocument;
use txcheck::{Model, WeakTrace};

fn model_arg(model: &str) -> PyResult<Model> {
    model.parse().map_err(|e: txcheck::model::UnknownModel| PyValueError::new_err(e.to_string()))
}

/// A parsed and unrolled program.
#[pyclass(name = "Program", frozen)]
struct PyProgram {
    inner: txcheck::Program,
}

#[pymethods]
impl PyProgram {
    #[staticmethod]
    #[pyo3(signature = (source, unroll = 4))]
    fn parse(source: &str, unroll: usize) -> PyResult<Self> {
        txcheck::prog::parse_program_with_bound(source, unroll)
            .map(|inner| PyProgram { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn shared_vars(&self) -> Vec<String> {
        self.inner.shared_vars.clone()
    }

    #[getter]
    fn num_processes(&self) -> usize {
        self.inner.processes.len()
    }

    #[getter]
    fn num_transactions(&self) -> usize {
        self.inner.num_transactions()
    }

    fn __repr__(&self) -> String {
        format!(
            "Program(processes={}, transactions={}, vars={:?})",
            self.inner.processes.len(),
            self.inner.num_transactions(),
            self.inner.shared_vars
        )
    }
}

/// A canonical weak trace (po and rf only) with its variable names.
#[pyclass(name = "WeakTrace", frozen, eq, hash, skip_from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PyWeakTrace {
    inner: WeakTrace,
    vars: Vec<String>,
}

#[pymethods]
impl PyWeakTrace {
    /// Parses and validates a JSON trace document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc: TraceDocument = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let inner = WeakTrace::from_document(&doc).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyWeakTrace { inner, vars: doc.vars })
    }

    fn to_json(&self) -> String {
        self.inner.to_json(&self.vars)
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    #[getter]
    fn transactions(&self) -> Vec<String> {
        self.inner.transactions.iter().map(ToString::to_string).collect()
    }

    #[getter]
    fn po(&self) -> Vec<(String, String)> {
        self.inner.po.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    /// `(source, reader, variable)` triples.
    #[getter]
    fn rf(&self) -> Vec<(String, String, String)> {
        self.inner.rf.iter().map(|&(s, r, v)| (s.to_string(), r.to_string(), self.vars[v].clone())).collect()
    }

    fn __repr__(&self) -> String {
        format!("WeakTrace({}, {} rf edges)", self.inner.digest(), self.inner.rf.len())
    }
}

/// A failed assertion and the observation sequence that reached it.
#[pyclass(name = "Violation", frozen, get_all)]
struct PyViolation {
    assert_site: String,
    observation_sequence: Vec<String>,
}

#[pymethods]
impl PyViolation {
    fn __repr__(&self) -> String {
        format!("Violation({:?})", self.assert_site)
    }
}

/// Result of exploring a program under one model.
#[pyclass(name = "Exploration", frozen)]
struct PyExploration {
    checked: cli::Checked,
}

#[pymethods]
impl PyExploration {
    /// `"SAFE"` or `"UNSAFE"`.
    #[getter]
    fn verdict(&self) -> String {
        self.checked.report.verdict.to_string()
    }

    #[getter]
    fn is_safe(&self) -> bool {
        self.checked.report.verdict == Verdict::Safe
    }

    #[getter]
    fn weak_traces(&self) -> Vec<PyWeakTrace> {
        let vars = &self.checked.program.shared_vars;
        self.checked.exploration.weak_traces.iter().map(|w| PyWeakTrace { inner: w.clone(), vars: vars.clone() }).collect()
    }

    #[getter]
    fn violations(&self) -> Vec<PyViolation> {
        self.checked
            .report
            .violations
            .iter()
            .map(|v| PyViolation { assert_site: v.assert_site.clone(), observation_sequence: v.observation_sequence.clone() })
            .collect()
    }

    #[getter]
    fn duplicates(&self) -> usize {
        self.checked.report.duplicates
    }

    #[getter]
    fn nodes(&self) -> u64 {
        self.checked.report.stats.nodes
    }

    #[getter]
    fn budget_exceeded(&self) -> bool {
        self.checked.report.budget_exceeded
    }

    /// The machine-readable report, as printed by the command-line tool.
    fn report_json(&self) -> String {
        self.checked.report.to_json()
    }

    fn __len__(&self) -> usize {
        self.checked.exploration.weak_traces.len()
    }

    fn __repr__(&self) -> String {
        format!("Exploration({}, {} traces)", self.checked.report.verdict, self.checked.exploration.weak_traces.len())
    }
}

/// Explores every weak trace of `program` under `model`.
#[pyfunction]
#[pyo3(signature = (program, model = "ccv", max_traces = None, max_nodes = None, stop_at_first = false, oracle_check = false))]
fn explore(
    py: Python<'_>,
    program: &PyProgram,
    model: &str,
    max_traces: Option<usize>,
    max_nodes: Option<u64>,
    stop_at_first: bool,
    oracle_check: bool,
) -> PyResult<PyExploration> {
    let cfg = RunConfig { model: model_arg(model)?, max_traces, max_nodes, stop_at_first, oracle_check, ..RunConfig::default() };
    let prog = program.inner.clone();
    let checked = py
        .detach(|| cli::check_program("program", prog, &cfg))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(PyExploration { checked })
}

/// Consistent weak traces of complete executions, by brute force.
#[pyfunction]
#[pyo3(signature = (program, model = "ccv"))]
fn enumerate_weak_traces(py: Python<'_>, program: &PyProgram, model: &str) -> PyResult<Vec<PyWeakTrace>> {
    let model = model_arg(model)?;
    let prog = &program.inner;
    let set = py
        .detach(|| oracle::enumerate_weak_traces(prog, model))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(set.into_iter().map(|w| PyWeakTrace { inner: w, vars: prog.shared_vars.clone() }).collect())
}

#[pymodule]
fn txcheck_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProgram>()?;
    m.add_class::<PyWeakTrace>()?;
    m.add_class::<PyViolation>()?;
    m.add_class::<PyExploration>()?;
    m.add_function(wrap_pyfunction!(explore, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_weak_traces, m)?)?;
    Ok(())
}
