//! Python bindings. Reports come back as plain dicts decoded from the library's JSON.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use pg3::clifford::{self, CliffordParallelism, ShearedWitness};
use pg3::dynamics::{self, Schedule};
use pg3::flows::{self, FlowParams, JordanCase, DEFAULT_CLASSIFY_TOL};
use pg3::projective::{self, matrix_from_rows, matrix_rows, Intersection, Tolerances};

fn err(e: pg3::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, x: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(x).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse<T: for<'de> serde::Deserialize<'de>>(what: &str, text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("malformed {what}: {e}")))
}

#[pyclass(name = "ProjPoint", module = "pg3py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyPoint(projective::ProjPoint);

#[pymethods]
impl PyPoint {
    #[new]
    fn new(coords: [f64; 4]) -> PyResult<Self> {
        projective::ProjPoint::from_array(coords).map(Self).map_err(err)
    }

    /// Unit representative with canonical sign.
    #[getter]
    fn coords(&self) -> [f64; 4] {
        (*self.0.coords()).into()
    }

    fn __repr__(&self) -> String {
        format!("ProjPoint({:?})", self.coords())
    }
}

#[pyclass(name = "Line", module = "pg3py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyLine(projective::Line);

#[pymethods]
impl PyLine {
    #[new]
    fn new(u: [f64; 4], v: [f64; 4]) -> PyResult<Self> {
        projective::Line::span(&u.into(), &v.into()).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_plucker(p: [f64; 6]) -> PyResult<Self> {
        projective::Line::plucker_lift(&p.into()).map(Self).map_err(err)
    }

    #[staticmethod]
    fn join(p: &PyPoint, q: &PyPoint) -> PyResult<Self> {
        projective::join_points(&p.0, &q.0).map(Self).map_err(err)
    }

    /// Coordinates (p01, p02, p03, p23, p31, p12).
    #[getter]
    fn plucker(&self) -> [f64; 6] {
        (*self.0.plucker()).into()
    }

    #[getter]
    fn frame(&self) -> [[f64; 4]; 2] {
        let [u, v] = self.0.frame();
        [(*u).into(), (*v).into()]
    }

    fn point_at(&self, theta: f64) -> PyPoint {
        PyPoint(self.0.point_at(theta))
    }

    fn distance(&self, other: &PyLine) -> f64 {
        projective::grassmann_distance(&self.0, &other.0)
    }

    #[pyo3(signature = (p, tol=None))]
    fn contains(&self, p: &PyPoint, tol: Option<f64>) -> bool {
        projective::incidence_residual(&p.0, &self.0) <= tol.unwrap_or(Tolerances::default().decision)
    }

    /// The common point, or None when the lines are skew. Equal lines raise.
    #[pyo3(signature = (other, tol=None))]
    fn meet(&self, other: &PyLine, tol: Option<f64>) -> PyResult<Option<PyPoint>> {
        let t = Tolerances { decision: tol.unwrap_or(Tolerances::default().decision), ..Tolerances::default() };
        match projective::lines_meet(&self.0, &other.0, &t) {
            Intersection::Meet(p) => Ok(Some(PyPoint(p))),
            Intersection::Disjoint => Ok(None),
            Intersection::Equal => Err(PyValueError::new_err("lines are equal")),
        }
    }

    fn __repr__(&self) -> String {
        format!("Line(plucker={:?})", self.plucker())
    }
}

#[pyclass(name = "ProjMap", module = "pg3py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMap(projective::ProjMap);

#[pymethods]
impl PyMap {
    #[new]
    fn new(rows: [[f64; 4]; 4]) -> PyResult<Self> {
        projective::ProjMap::from_rows(rows).map(Self).map_err(err)
    }

    #[getter]
    fn matrix(&self) -> [[f64; 4]; 4] {
        matrix_rows(self.0.matrix())
    }

    /// `self` first, then `next`.
    fn then(&self, next: &PyMap) -> PyResult<PyMap> {
        self.0.then(&next.0).map(Self).map_err(err)
    }

    fn inverse(&self) -> PyResult<PyMap> {
        self.0.inverse().map(Self).map_err(err)
    }

    fn apply_point(&self, p: &PyPoint) -> PyResult<PyPoint> {
        self.0.apply_point(&p.0).map(PyPoint).map_err(err)
    }

    fn apply_line(&self, l: &PyLine) -> PyResult<PyLine> {
        self.0.apply_line(&l.0).map(PyLine).map_err(err)
    }

    fn distance(&self, other: &PyMap) -> f64 {
        self.0.distance(&other.0)
    }
}

#[pyclass(name = "Flow", module = "pg3py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyFlow(flows::OneParamFlow);

#[pymethods]
impl PyFlow {
    #[new]
    #[pyo3(signature = (case, a=0.0, b=0.0, c=0.0, d=0.0))]
    fn new(case: &str, a: f64, b: f64, c: f64, d: f64) -> PyResult<Self> {
        let case: JordanCase = case.parse().map_err(err)?;
        flows::OneParamFlow::new(case, FlowParams::new(a, b, c, d)).map(Self).map_err(err)
    }

    /// Classifies a generator matrix and builds its normal-form flow.
    #[staticmethod]
    #[pyo3(signature = (rows, tol=DEFAULT_CLASSIFY_TOL))]
    fn from_matrix(rows: [[f64; 4]; 4], tol: f64) -> PyResult<Self> {
        let r = flows::classify_generator(&matrix_from_rows(&rows), tol).map_err(err)?;
        flows::OneParamFlow::new(r.case, r.params).map(Self).map_err(err)
    }

    #[getter]
    fn case(&self) -> &'static str {
        self.0.case().as_str()
    }

    #[getter]
    fn params(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, self.0.params())
    }

    #[getter]
    fn generator(&self) -> [[f64; 4]; 4] {
        matrix_rows(self.0.generator())
    }

    fn gamma(&self, t: f64) -> PyMap {
        PyMap(self.0.gamma(t))
    }

    #[pyo3(signature = (tol=None))]
    fn fixed_lines(&self, py: Python<'_>, tol: Option<f64>) -> PyResult<Py<PyAny>> {
        to_py(py, &flows::fixed_lines(&self.0, tol.unwrap_or(1e-9)))
    }

    fn compactness(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &flows::compactness_status(&self.0))
    }

    /// Orbit limit of a line or a point. `schedule` is the JSON used by the CLI.
    #[pyo3(signature = (start, schedule=None, tol=1e-8, backward=false))]
    fn limit(
        &self,
        py: Python<'_>,
        start: &Bound<'_, PyAny>,
        schedule: Option<&str>,
        tol: f64,
        backward: bool,
    ) -> PyResult<Py<PyAny>> {
        let mut s: Schedule = match schedule {
            Some(text) => parse("schedule", text)?,
            None => Schedule::default(),
        };
        if backward {
            s = s.backward();
        }
        if let Ok(l) = start.cast::<PyLine>() {
            to_py(py, &dynamics::line_orbit_limit(&self.0, &l.get().0, &s, tol).map_err(err)?)
        } else if let Ok(p) = start.cast::<PyPoint>() {
            to_py(py, &dynamics::point_orbit_limit(&self.0, &p.get().0, &s, tol).map_err(err)?)
        } else {
            Err(PyValueError::new_err("start must be a Line or a ProjPoint"))
        }
    }

    fn __repr__(&self) -> String {
        format!("Flow({})", self.0.case())
    }
}

#[pyfunction]
#[pyo3(signature = (rows, tol=DEFAULT_CLASSIFY_TOL))]
fn classify(py: Python<'_>, rows: [[f64; 4]; 4], tol: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &flows::classify_generator(&matrix_from_rows(&rows), tol).map_err(err)?)
}

#[pyfunction]
fn clifford_parallel(p: &PyPoint, l: &PyLine) -> PyLine {
    PyLine(clifford::clifford_parallel(&p.0, &l.0))
}

#[pyfunction]
fn is_clifford_parallel(l: &PyLine, m: &PyLine) -> bool {
    clifford::is_clifford_parallel(&l.0, &m.0, &Tolerances::default())
}

#[pyfunction]
#[pyo3(signature = (samples=1000, seed=7, mutated=false))]
fn spread_audit(py: Python<'_>, samples: usize, seed: u64, mutated: bool) -> PyResult<Py<PyAny>> {
    let tol = Tolerances::default();
    let inner = CliffordParallelism;
    let report = if mutated {
        clifford::spread_audit(&ShearedWitness::new(&inner), samples, seed, &tol)
    } else {
        clifford::spread_audit(&inner, samples, seed, &tol)
    };
    to_py(py, &report)
}

/// Runs a replay: "a1", "c1", "c1-lemma", "c3", "c4", "c5", or a discrete case "a1"/"a2"/"b1"/"b2"
/// with `discrete=True`.
#[pyfunction]
#[pyo3(signature = (which, a=None, b=None, c=None, d=None, samples=100, seed=7, n_max=1000, grid=None, discrete=false))]
#[allow(clippy::too_many_arguments)]
fn replay(
    py: Python<'_>,
    which: &str,
    a: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
    d: Option<f64>,
    samples: usize,
    seed: u64,
    n_max: usize,
    grid: Option<usize>,
    discrete: bool,
) -> PyResult<Py<PyAny>> {
    let defaults = match which {
        "a1" if !discrete => FlowParams::new(1.0, 1.0, 2.0, 0.0),
        "c3" => FlowParams::new(1.0, 0.0, 0.0, 0.0),
        "c4" => FlowParams::new(0.0, 1.0, 2.0, 0.0),
        "c5" => FlowParams::new(0.0, 1.0, 2.0, 3.0),
        _ => FlowParams::default(),
    };
    let p = FlowParams::new(a.unwrap_or(defaults.a), b.unwrap_or(defaults.b), c.unwrap_or(defaults.c), d.unwrap_or(defaults.d));
    let report = if discrete {
        let case: JordanCase = which.parse().map_err(err)?;
        let p = if [a, b, c, d].iter().all(Option::is_none) { *flows::OneParamFlow::canonical(case).params() } else { p };
        dynamics::replay_discrete(case, p, samples, seed)
    } else {
        match which {
            "a1" => dynamics::replay_a1(p, samples, seed),
            "c1" => dynamics::replay_c1(n_max),
            "c1-lemma" => dynamics::replay_lemma_c1(n_max),
            "c3" => dynamics::replay_c3(p.a, grid.unwrap_or(201)),
            "c4" => dynamics::replay_c4(p, grid.unwrap_or(51)),
            "c5" => dynamics::replay_c5(p, samples, seed),
            other => return Err(PyValueError::new_err(format!("unknown replay '{other}'"))),
        }
    }
    .map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn pg3py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPoint>()?;
    m.add_class::<PyLine>()?;
    m.add_class::<PyMap>()?;
    m.add_class::<PyFlow>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(clifford_parallel, m)?)?;
    m.add_function(wrap_pyfunction!(is_clifford_parallel, m)?)?;
    m.add_function(wrap_pyfunction!(spread_audit, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    Ok(())
}
