//! Python bindings. Reports come back as plain dicts.

use indef_lyap::cli::SystemFile;
use indef_lyap::exprlang::{parse_in, Binding, Expr, Scope, VectorField};
use indef_lyap::gronwall::{kappa as kappa_curve, DriftPair};
use indef_lyap::odesim::{simulate_with, InputSignal, SimOptions};
use indef_lyap::quadsig::{
    classify as classify_signal, classify_periodic, default_t0_samples, ScalarSignal,
    DEFAULT_ALPHA_MIN, DEFAULT_HORIZON,
};
use indef_lyap::verify::{catalog as catalog_entries, run_analysis};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(indef_lyap_py, IndefLyapError, PyException);

fn fail(e: impl std::fmt::Display) -> PyErr {
    IndefLyapError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(fail)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Parsed expression in `t`, `s`, `x1..xn`, `u1..um`.
#[pyclass(frozen, name = "Expression")]
struct PyExpression {
    inner: Expr,
}

#[pymethods]
impl PyExpression {
    #[new]
    fn new(source: &str) -> PyResult<Self> {
        let inner = parse_in(source, &Scope::ANY).map_err(fail)?;
        Ok(PyExpression { inner })
    }

    #[pyo3(signature = (t=None, s=None, x=Vec::new(), u=Vec::new()))]
    fn eval(&self, t: Option<f64>, s: Option<f64>, x: Vec<f64>, u: Vec<f64>) -> PyResult<f64> {
        let b = Binding { t, s, x: &x, u: &u };
        self.inner.eval(&b).map_err(fail)
    }

    fn variables(&self) -> Vec<String> {
        self.inner
            .variables()
            .iter()
            .map(|v| v.to_string())
            .collect()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expression({:?})", self.inner.to_string())
    }
}

/// A parsed system file.
#[pyclass(frozen, name = "System")]
struct PySystem {
    name: String,
    file: SystemFile,
}

#[pymethods]
impl PySystem {
    #[staticmethod]
    #[pyo3(signature = (text, name="system"))]
    fn parse(text: &str, name: &str) -> PyResult<Self> {
        let file = SystemFile::parse(text).map_err(fail)?;
        Ok(PySystem {
            name: name.to_string(),
            file,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(fail)?;
        let name = path
            .file_stem()
            .map_or("system".into(), |s| s.to_string_lossy().into_owned());
        Self::parse(&text, &name)
    }

    /// Shipped example by name.
    #[staticmethod]
    fn example(name: &str) -> PyResult<Self> {
        let entry = catalog_entries()
            .into_iter()
            .find(|e| e.name == name)
            .ok_or_else(|| fail(format!("no example named {name:?}")))?;
        Self::parse(&indef_lyap::cli::render_system_file(&entry), name)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.name
    }

    /// Full analysis report; `seed` overrides the file's seed.
    #[pyo3(signature = (seed=None))]
    fn verify(&self, py: Python<'_>, seed: Option<u64>) -> PyResult<Py<PyAny>> {
        let analysis = self.file.analysis(&self.name, seed).map_err(fail)?;
        let outcome = py.detach(|| run_analysis(&analysis)).map_err(fail)?;
        to_py(py, &outcome.report)
    }
}

/// Classifies `mu(t)` by sampling initial times, or over one period.
#[pyfunction]
#[pyo3(signature = (mu, horizon=DEFAULT_HORIZON, t0s=None, alpha_min=DEFAULT_ALPHA_MIN, start=0.0, period=None))]
fn classify(
    py: Python<'_>,
    mu: &str,
    horizon: f64,
    t0s: Option<Vec<f64>>,
    alpha_min: f64,
    start: f64,
    period: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let signal = ScalarSignal::parse(mu, start).map_err(fail)?;
    let verdict = match period {
        Some(p) => classify_periodic(&signal, p).map_err(fail)?,
        None => {
            let t0s = t0s.unwrap_or_else(|| default_t0_samples(start, horizon));
            classify_signal(&signal, horizon, &t0s, alpha_min).map_err(fail)?
        }
    };
    to_py(py, &verdict)
}

/// Drift convolution `kappa(t, t0)` on `[t0, horizon]`.
#[pyfunction]
#[pyo3(signature = (mu, pi, t0=0.0, horizon=100.0, grid=0.05))]
fn kappa(
    py: Python<'_>,
    mu: &str,
    pi: &str,
    t0: f64,
    horizon: f64,
    grid: f64,
) -> PyResult<Py<PyAny>> {
    let start = t0.min(0.0);
    let mu = ScalarSignal::parse(mu, start).map_err(fail)?;
    let pi = ScalarSignal::parse(pi, start).map_err(fail)?;
    let pair = DriftPair::new(mu, pi, horizon - t0).map_err(fail)?;
    let curve = kappa_curve(&pair, t0, horizon, grid).map_err(fail)?;
    to_py(py, &curve)
}

#[derive(Serialize)]
struct Run {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    termination: indef_lyap::odesim::Termination,
    diagnostic: Option<String>,
}

/// Integrates `x' = f(t, x, u(t))` with adaptive Dormand-Prince steps.
#[pyfunction]
#[pyo3(signature = (field, x0, t0, tf, inputs=Vec::new(), rtol=1e-9, atol=1e-12))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    field: Vec<String>,
    x0: Vec<f64>,
    t0: f64,
    tf: f64,
    inputs: Vec<String>,
    rtol: f64,
    atol: f64,
) -> PyResult<Py<PyAny>> {
    let srcs: Vec<&str> = field.iter().map(String::as_str).collect();
    let f = VectorField::parse(&srcs, inputs.len()).map_err(fail)?;
    let usrcs: Vec<&str> = inputs.iter().map(String::as_str).collect();
    let u = if usrcs.is_empty() {
        InputSignal::zero(0)
    } else {
        InputSignal::parse(&usrcs).map_err(fail)?
    };
    let opts = SimOptions {
        rtol,
        atol,
        ..SimOptions::default()
    };
    let traj = py
        .detach(|| simulate_with(&f, &u, t0, &x0, tf, &opts))
        .map_err(fail)?;
    to_py(
        py,
        &Run {
            times: traj.times.clone(),
            states: traj.states.clone(),
            termination: traj.termination,
            diagnostic: traj.diagnostic.clone(),
        },
    )
}

/// Names of the shipped examples.
#[pyfunction]
fn examples() -> Vec<String> {
    catalog_entries().into_iter().map(|e| e.name).collect()
}

#[pymodule]
fn indef_lyap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("IndefLyapError", m.py().get_type::<IndefLyapError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyExpression>()?;
    m.add_class::<PySystem>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(examples, m)?)?;
    Ok(())
}
