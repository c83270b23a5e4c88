//! Python bindings for `permsym`.
//!
//! Fields cross the boundary as flat lists of samples in x-fastest order.
//! Structured results come back as plain dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use permsym::axisym::{self, Family, FamilyParams};
use permsym::biot_savart;
use permsym::constraint;
use permsym::lambda;
use permsym::pullback::permutation_residual_max;
use permsym::snapshot::{self, SnapshotHeader};
use permsym::solver::{self, SolverConfig};
use permsym::spectral::{self, NormKind, NormSpec};
use permsym::verify::{run_suite, Hooks, Level};
use permsym::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(m) | Error::InvalidConfig(m) => PyValueError::new_err(m),
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_dict<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import_bound("json")?.call_method1("loads", (text,))?.unbind())
}

/// Periodic grid of `n` nodes per axis on `[-L/2, L/2)`.
#[pyclass(name = "Grid", frozen)]
#[derive(Clone, Copy)]
struct PyGrid(permsym::Grid);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (n, length))]
    fn new(n: usize, length: f64) -> PyResult<Self> {
        permsym::Grid::new(n, length).map(PyGrid).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn length(&self) -> f64 {
        self.0.length()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Coordinates of node `idx`.
    fn point(&self, idx: usize) -> PyResult<[f64; 3]> {
        if idx >= self.0.len() {
            return Err(PyValueError::new_err("node index out of range"));
        }
        Ok(self.0.point(idx))
    }

    fn __repr__(&self) -> String {
        format!("Grid(n={}, length={})", self.0.n(), self.0.length())
    }
}

#[pyclass(name = "ScalarField", frozen)]
#[derive(Clone)]
struct PyScalar(permsym::ScalarField);

#[pymethods]
impl PyScalar {
    #[new]
    fn new(grid: &PyGrid, samples: Vec<f64>) -> PyResult<Self> {
        permsym::ScalarField::new(grid.0, samples).map(PyScalar).map_err(to_py)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    fn samples(&self) -> Vec<f64> {
        self.0.samples().to_vec()
    }

    fn norm_l2(&self) -> f64 {
        self.0.norm_l2()
    }

    fn norm_linf(&self) -> f64 {
        self.0.norm_linf()
    }

    /// `kind` is `hs`, `hdot_neg1` or `hs_cap_hdot_neg1`.
    #[pyo3(signature = (s, kind = "hs"))]
    fn sobolev_norm(&self, s: f64, kind: &str) -> PyResult<f64> {
        let kind = match kind {
            "hs" => NormKind::Hs,
            "hdot_neg1" => NormKind::HdotNeg1,
            "hs_cap_hdot_neg1" => NormKind::HsCapHdotNeg1,
            other => return Err(PyValueError::new_err(format!("unknown norm kind {other:?}"))),
        };
        spectral::sobolev_norm(&self.0, NormSpec::new(s), kind).map_err(to_py)
    }

    /// `(physical, fourier)` residuals of the constraint.
    fn constraint_residual(&self) -> (f64, f64) {
        let r = constraint::constraint_residual(&self.0);
        (r.physical, r.fourier)
    }

    fn project(&self) -> PyScalar {
        PyScalar(constraint::project_constraint(&self.0))
    }

    fn __repr__(&self) -> String {
        format!("ScalarField(n={}, l2={:.6e})", self.0.grid().n(), self.0.norm_l2())
    }
}

#[pyclass(name = "VectorField", frozen)]
#[derive(Clone)]
struct PyVector(permsym::VectorField);

#[pymethods]
impl PyVector {
    #[new]
    fn new(a: &PyScalar, b: &PyScalar, c: &PyScalar) -> PyResult<Self> {
        permsym::VectorField::new(a.0.clone(), b.0.clone(), c.0.clone()).map(PyVector).map_err(to_py)
    }

    fn component(&self, a: usize) -> PyResult<PyScalar> {
        if a > 2 {
            return Err(PyValueError::new_err("component index must be 0, 1 or 2"));
        }
        Ok(PyScalar(self.0.comp(a).clone()))
    }

    fn norm_l2(&self) -> f64 {
        self.0.norm_l2()
    }

    fn norm_linf(&self) -> f64 {
        self.0.norm_linf()
    }

    fn curl(&self) -> PyVector {
        PyVector(spectral::curl(&self.0))
    }

    /// Largest residual of invariance under the six coordinate permutations.
    fn permutation_residual(&self) -> f64 {
        permutation_residual_max(&self.0)
    }
}

/// Sign-condition initial data `w1` for `family` (gaussian, ring, perturbed).
#[pyfunction]
#[pyo3(signature = (grid, family, amplitude = 1.0, width = 1.0, radius = 1.0, perturbation = 0.3))]
fn sign_condition_data(
    grid: &PyGrid,
    family: &str,
    amplitude: f64,
    width: f64,
    radius: f64,
    perturbation: f64,
) -> PyResult<PyScalar> {
    let family: Family = family.parse().map_err(to_py)?;
    let params = FamilyParams { amplitude, width, radius, perturbation };
    axisym::sign_condition_data(grid.0, family, &params).map(PyScalar).map_err(to_py)
}

#[pyfunction]
fn velocity_from_w1(w1: &PyScalar) -> PyResult<PyVector> {
    biot_savart::velocity_from_w1(&w1.0).map(PyVector).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (w1, tol = constraint::MEMBERSHIP_TOL))]
fn reconstruct_vorticity(w1: &PyScalar, tol: f64) -> PyResult<PyVector> {
    constraint::reconstruct_vorticity(&w1.0, tol).map(PyVector).map_err(to_py)
}

#[pyfunction]
fn extract_w1(u: &PyVector) -> PyResult<PyScalar> {
    constraint::extract_w1(&u.0).map(PyScalar).map_err(to_py)
}

/// Velocity at `points` by kernel quadrature and by the spectral route.
#[pyfunction]
fn velocity_at(w1: &PyScalar, points: Vec<[f64; 3]>) -> PyResult<(Vec<[f64; 3]>, Vec<[f64; 3]>)> {
    let k = biot_savart::velocity_kernel(&w1.0, &points).map_err(to_py)?;
    let s = biot_savart::velocity_spectral_at(&w1.0, &points).map_err(to_py)?;
    Ok((k, s))
}

/// Strain at the origin and every lambda evaluation, as a dict.
#[pyfunction]
fn lambda_diagnostics(py: Python<'_>, w1: &PyScalar) -> PyResult<PyObject> {
    let r = lambda::lambda_diagnostics(&w1.0).map_err(to_py)?;
    to_dict(py, &r)
}

#[pyfunction]
fn rotation_q() -> [[f64; 3]; 3] {
    let q = axisym::rotation_q();
    let m = q.matrix();
    [0, 1, 2].map(|r| [0, 1, 2].map(|c| m[(r, c)]))
}

/// Runs a TOML configuration and returns `(records, final_w1, breakdown)`.
#[pyfunction]
fn run(py: Python<'_>, config: &str) -> PyResult<(PyObject, PyScalar, Option<PyObject>)> {
    let cfg = SolverConfig::from_toml(config).map_err(to_py)?;
    let out = py.allow_threads(|| solver::run(&cfg)).map_err(to_py)?;
    let records = to_dict(py, &out.records)?;
    let breakdown = out.breakdown.as_ref().map(|b| to_dict(py, b)).transpose()?;
    Ok((records, PyScalar(out.final_state.first_component().clone()), breakdown))
}

/// Runs the identity suites; `level` is `fast` or `full`.
#[pyfunction]
#[pyo3(signature = (level = "fast"))]
fn verify(py: Python<'_>, level: &str) -> PyResult<PyObject> {
    let level = match level {
        "fast" => Level::Fast,
        "full" => Level::Full,
        other => return Err(PyValueError::new_err(format!("unknown level {other:?}"))),
    };
    let results = py.allow_threads(|| run_suite(level, Hooks::default()));
    to_dict(py, &results)
}

#[pyfunction]
#[pyo3(signature = (path, field, kind = "w1", time = 0.0))]
fn write_snapshot(path: PathBuf, field: &PyScalar, kind: &str, time: f64) -> PyResult<()> {
    let header = SnapshotHeader::new(field.0.grid(), kind, time);
    snapshot::write_scalar(&path, &field.0, &header).map_err(to_py)
}

/// Returns `(header, field)`.
#[pyfunction]
fn read_snapshot(py: Python<'_>, path: PathBuf) -> PyResult<(PyObject, PyScalar)> {
    let (h, f) = snapshot::read_scalar(&path).map_err(to_py)?;
    Ok((to_dict(py, &h)?, PyScalar(f)))
}

#[pymodule]
pub fn permsym_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyScalar>()?;
    m.add_class::<PyVector>()?;
    m.add_function(wrap_pyfunction!(sign_condition_data, m)?)?;
    m.add_function(wrap_pyfunction!(velocity_from_w1, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_vorticity, m)?)?;
    m.add_function(wrap_pyfunction!(extract_w1, m)?)?;
    m.add_function(wrap_pyfunction!(velocity_at, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_diagnostics, m)?)?;
    m.add_function(wrap_pyfunction!(rotation_q, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(write_snapshot, m)?)?;
    m.add_function(wrap_pyfunction!(read_snapshot, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
