//! Python bindings. Structured results (verdicts, classifications, reports)
//! come back as plain dicts, in the same shape as the CLI's JSON payloads.

use aou_core::compression::{default_probes, projection_test as run_projection, ContractionTuple, ScheduleParams};
use aou_core::correlations::{self, BellFunctional, Correlation as CoreCorrelation};
use aou_core::nonsignalling::{build_ns_space, relation_rank, Scenario as CoreScenario};
use aou_core::space::{diagonal_cone, DiagonalModel, SpaceElement};
use aou_core::verify::{self, Suite};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: aou_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn params(eps: Option<Vec<f64>>, t_max: f64, budget_rows: usize) -> PyResult<ScheduleParams> {
    let mut p = ScheduleParams {
        t_max,
        budget_rows,
        ..ScheduleParams::default()
    };
    if let Some(eps) = eps {
        p.eps = eps;
    }
    p.validate().map_err(err)?;
    Ok(p)
}

/// Bipartite scenario with `n` inputs and `k` outputs per party.
#[pyclass(frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
pub struct Scenario {
    inner: CoreScenario,
}

#[pymethods]
impl Scenario {
    #[new]
    fn new(n: usize, k: usize) -> PyResult<Self> {
        Ok(Self {
            inner: CoreScenario::new(n, k).map_err(err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn num_generators(&self) -> usize {
        self.inner.num_generators()
    }

    /// Dimension of the nonsignalling operator system.
    #[getter]
    fn ns_dimension(&self) -> usize {
        self.inner.ns_dimension()
    }

    fn relation_rank(&self) -> usize {
        relation_rank(self.inner)
    }

    fn basis_labels(&self) -> PyResult<Vec<String>> {
        Ok(build_ns_space(self.inner).map_err(err)?.basis_labels().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Scenario({}, {})", self.inner.n, self.inner.k)
    }
}

/// Probabilities `p(a,b|x,y)` in lexicographic `(x, y, a, b)` order.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Correlation {
    inner: CoreCorrelation,
}

#[pymethods]
impl Correlation {
    #[new]
    fn new(scenario: &Scenario, p: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: CoreCorrelation::new(scenario.inner, p).map_err(err)?,
        })
    }

    /// Parses the `scenario n k` / `x y a b value` text format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: CoreCorrelation::parse(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn deterministic(scenario: &Scenario, index: usize) -> Self {
        Self {
            inner: CoreCorrelation::deterministic(scenario.inner, index),
        }
    }

    #[getter]
    fn scenario(&self) -> Scenario {
        Scenario {
            inner: self.inner.scenario,
        }
    }

    #[getter]
    fn p(&self) -> Vec<f64> {
        self.inner.p.clone()
    }

    fn get(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.inner.get(x, y, a, b)
    }

    /// Empty when the entries form a valid correlation.
    fn issues(&self) -> Vec<String> {
        match correlations::validate(&self.inner) {
            Ok(()) => Vec::new(),
            Err(issues) => issues.iter().map(|i| i.to_string()).collect(),
        }
    }

    #[pyo3(signature = (tol = correlations::DEFAULT_TOL))]
    fn is_nonsignalling(&self, tol: f64) -> bool {
        correlations::is_nonsignalling_direct(&self.inner, tol).nonsignalling
    }

    /// Locality verdict with its certificate (decomposition or Bell witness).
    #[pyo3(signature = (tol = correlations::DEFAULT_TOL))]
    fn is_local(&self, py: Python<'_>, tol: f64) -> PyResult<Py<PyAny>> {
        to_py(py, &correlations::is_local(&self.inner, tol).map_err(err)?)
    }

    fn bell_value(&self, coefficients: Vec<f64>) -> PyResult<f64> {
        let f = BellFunctional::new(self.inner.scenario, coefficients).map_err(err)?;
        correlations::bell_value(&self.inner, &f).map_err(err)
    }

    #[pyo3(signature = (l_max = 1, seed = 0, tol = correlations::DEFAULT_TOL, eps = None, t_max = aou_core::compression::DEFAULT_T_MAX, budget_rows = aou_core::compression::DEFAULT_BUDGET_ROWS))]
    fn classify(
        &self,
        py: Python<'_>,
        l_max: usize,
        seed: u64,
        tol: f64,
        eps: Option<Vec<f64>>,
        t_max: f64,
        budget_rows: usize,
    ) -> PyResult<Py<PyAny>> {
        let params = params(eps, t_max, budget_rows)?;
        let ns = build_ns_space(self.inner.scenario).map_err(err)?;
        let c = correlations::classify(&self.inner, &ns, l_max, &params, tol, seed).map_err(err)?;
        to_py(py, &c)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!(
            "Correlation({}, {}, {:?})",
            self.inner.scenario.n, self.inner.scenario.k, self.inner.p
        )
    }
}

/// CHSH coefficients in the (2, 2) scenario.
#[pyfunction]
fn chsh() -> Vec<f64> {
    correlations::chsh().coefficients
}

/// Maximum over nonsignalling correlations and a maximizer.
#[pyfunction]
fn maximize_over_ns(scenario: &Scenario, coefficients: Vec<f64>) -> PyResult<(f64, Correlation)> {
    let f = BellFunctional::new(scenario.inner, coefficients).map_err(err)?;
    let (value, p) = correlations::maximize_over_ns(&f).map_err(err)?;
    Ok((value, Correlation { inner: p }))
}

/// Maximum over local correlations and the index of a maximizing
/// deterministic strategy.
#[pyfunction]
fn maximize_over_local(scenario: &Scenario, coefficients: Vec<f64>) -> PyResult<(f64, usize)> {
    let f = BellFunctional::new(scenario.inner, coefficients).map_err(err)?;
    correlations::maximize_over_local(&f).map_err(err)
}

/// Tests whether diagonal contractions of the `size`-dimensional diagonal
/// model behave as abstract projections, on default plus extra probes.
#[pyfunction]
#[pyo3(signature = (size, contractions, probes = Vec::new(), random = 50, seed = 0, l_max = 2))]
fn projection_test(
    py: Python<'_>,
    size: usize,
    contractions: Vec<Vec<f64>>,
    probes: Vec<Vec<f64>>,
    random: usize,
    seed: u64,
    l_max: usize,
) -> PyResult<Py<PyAny>> {
    if size == 0 || contractions.iter().chain(&probes).any(|v| v.len() != size) {
        return Err(PyValueError::new_err(format!("every vector needs {size} entries")));
    }
    let model = DiagonalModel::full(size);
    let cone = diagonal_cone(&model);
    let tuple = ContractionTuple::new(
        cone.as_ref(),
        contractions.iter().map(|p| SpaceElement::real(p)).collect(),
    )
    .map_err(err)?;
    let mut all = default_probes(&tuple, random, seed);
    all.extend(probes.iter().map(|v| SpaceElement::real(v)));
    let report = run_projection(cone.as_ref(), &tuple, &all, l_max, &ScheduleParams::default()).map_err(err)?;
    to_py(py, &report)
}

/// Runs an invariant suite; the dict matches `aou verify --out`.
#[pyfunction]
#[pyo3(signature = (suite = "all", seed = 0))]
fn run_verify(py: Python<'_>, suite: &str, seed: u64) -> PyResult<Py<PyAny>> {
    let suite: Suite = suite.parse().map_err(err)?;
    let report = py.detach(|| verify::run_suite(suite, seed));
    to_py(py, &report)
}

#[pyfunction]
fn check_ids() -> Vec<&'static str> {
    verify::check_ids()
}

#[pymodule]
fn aou(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Correlation>()?;
    m.add_function(wrap_pyfunction!(chsh, m)?)?;
    m.add_function(wrap_pyfunction!(maximize_over_ns, m)?)?;
    m.add_function(wrap_pyfunction!(maximize_over_local, m)?)?;
    m.add_function(wrap_pyfunction!(projection_test, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    m.add_function(wrap_pyfunction!(check_ids, m)?)?;
    m.add("SCHEMA", verify::SCHEMA)?;
    Ok(())
}
