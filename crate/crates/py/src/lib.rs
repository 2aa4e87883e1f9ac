//! Python bindings for `loggas-core`.
//!
//! Positions and field samples cross the boundary as flat lists of floats in
//! row-major order; every fallible call raises `ValueError` with the core
//! error message.

use loggas_core::field::{self, FourierField, Norm};
use loggas_core::particles;
use loggas_core::snapshot;
use loggas_core::solver::{self, ModelParams, Recording, StopReason, StopRule};
use loggas_core::stability;
use loggas_core::{Grid, PotentialTables};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::f64::consts::PI;

fn err(e: loggas_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Precomputed periodic log potential on `T^d` at `n` points per axis.
#[pyclass(name = "PotentialTables", module = "loggas")]
struct PyTables {
    inner: PotentialTables,
}

#[pymethods]
impl PyTables {
    #[new]
    fn new(d: usize, n: usize) -> PyResult<Self> {
        Ok(Self { inner: PotentialTables::new(d, n).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.grid().dim()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.grid().n()
    }

    fn g(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.eval_g(&x).map_err(err)
    }

    fn g_eta(&self, x: Vec<f64>, eta: f64) -> PyResult<f64> {
        self.inner.eval_g_eta(&x, eta).map_err(err)
    }

    #[pyo3(signature = (x, eta = 0.0))]
    fn force(&self, x: Vec<f64>, eta: f64) -> PyResult<Vec<f64>> {
        self.inner.eval_force(&x, eta).map_err(err)
    }
}

/// Real density sampled on a uniform periodic grid.
#[pyclass(name = "Field", module = "loggas", skip_from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: FourierField,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(d: usize, n: usize, values: Vec<f64>) -> PyResult<Self> {
        let grid = Grid::new(d, n).map_err(err)?;
        Ok(Self { inner: FourierField::from_values(grid, values).map_err(err)? })
    }

    #[staticmethod]
    fn uniform(d: usize, n: usize) -> PyResult<Self> {
        Ok(Self { inner: FourierField::uniform(Grid::new(d, n).map_err(err)?) })
    }

    /// `1 + 2 eps cos(2π k·x)`.
    #[staticmethod]
    fn cosine(n: usize, eps: f64, k: Vec<i64>) -> PyResult<Self> {
        let grid = Grid::new(k.len(), n).map_err(err)?;
        let inner = FourierField::from_fn(grid, |x| {
            let s: f64 = x.iter().zip(&k).map(|(a, b)| a * *b as f64).sum();
            1.0 + 2.0 * eps * (2.0 * PI * s).cos()
        });
        Ok(Self { inner })
    }

    #[staticmethod]
    fn bump(lam: f64, d: usize, n: usize) -> PyResult<Self> {
        Ok(Self { inner: solver::bump_family(lam, d, n).map_err(err)? })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<(Self, f64)> {
        let file = std::fs::File::open(path).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let (inner, t) = snapshot::read_snapshot(std::io::BufReader::new(file)).map_err(err)?;
        Ok((Self { inner }, t))
    }

    #[pyo3(signature = (path, time = 0.0))]
    fn write(&self, path: &str, time: f64) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(|e| PyValueError::new_err(e.to_string()))?;
        snapshot::write_snapshot(std::io::BufWriter::new(file), &self.inner, time).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.grid().dim()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.grid().n()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn mass(&self) -> f64 {
        self.inner.mass()
    }

    fn mode_amplitude(&self, k: Vec<i64>) -> f64 {
        self.inner.mode_amplitude(&k)
    }

    /// Distance to the uniform density in `"l1"`, `"l2"` or `"linf"`.
    #[pyo3(signature = (norm = "l2"))]
    fn distance_to_uniform(&self, norm: &str) -> PyResult<f64> {
        let which = match norm {
            "l1" => Norm::L1,
            "l2" => Norm::L2,
            "linf" => Norm::LInf,
            other => return Err(PyValueError::new_err(format!("unknown norm {other:?}"))),
        };
        Ok(field::distance_to_uniform(&self.inner, which))
    }

    fn free_energy(&self, beta: f64, tables: &PyTables) -> PyResult<f64> {
        field::free_energy(&self.inner, beta, &tables.inner).map_err(err)
    }

    fn dissipation(&self, beta: f64, tables: &PyTables) -> PyResult<f64> {
        field::dissipation(&self.inner, beta, &tables.inner).map_err(err)
    }

    fn interaction_energy(&self, tables: &PyTables) -> PyResult<f64> {
        field::interaction_energy(&self.inner, &self.inner, &tables.inner).map_err(err)
    }

    fn fisher_information(&self) -> PyResult<f64> {
        field::fisher_information(&self.inner).map_err(err)
    }

    fn relative_entropy(&self, reference: &PyField) -> PyResult<f64> {
        field::relative_entropy(&self.inner, &reference.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Field(d={}, n={}, mass={:.6})", self.dim(), self.n(), self.mass())
    }
}

/// Interacting particles driven by the truncated log-gas force.
#[pyclass(name = "ParticleEnsemble", module = "loggas")]
struct PyEnsemble {
    inner: particles::ParticleEnsemble,
}

#[pymethods]
impl PyEnsemble {
    #[new]
    fn new(d: usize, positions: Vec<f64>, beta: f64, eta: f64, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: particles::ParticleEnsemble::new(d, positions, beta, eta, seed).map_err(err)? })
    }

    #[staticmethod]
    fn sample(density: &PyField, n: usize, beta: f64, eta: f64, seed: u64) -> PyResult<Self> {
        let inner = particles::ParticleEnsemble::sample(&density.inner, n, beta, eta, seed).map_err(err)?;
        Ok(Self { inner })
    }

    fn positions(&self) -> Vec<f64> {
        self.inner.positions().to_vec()
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[pyo3(signature = (dt, tables, steps = 1))]
    fn step(&mut self, dt: f64, tables: &PyTables, steps: usize) -> PyResult<()> {
        for _ in 0..steps {
            self.inner.step(dt, &tables.inner).map_err(err)?;
        }
        Ok(())
    }

    fn pair_energy(&self, tables: &PyTables) -> PyResult<f64> {
        self.inner.pair_energy(&tables.inner).map_err(err)
    }

    fn modulated_energy(&self, reference: &PyField, tables: &PyTables) -> PyResult<f64> {
        particles::modulated_energy(self.inner.positions(), &reference.inner, &tables.inner).map_err(err)
    }

    fn chaos_distance(&self, reference: &PyField, bandwidth: f64) -> PyResult<f64> {
        particles::chaos_distance(self.inner.positions(), &reference.inner, bandwidth).map_err(err)
    }
}

/// Returns `(c_d, beta_c, beta_s)`.
#[pyfunction]
fn dimension_constants(d: usize) -> PyResult<(f64, f64, f64)> {
    let c = loggas_core::dimension_constants(d).map_err(err)?;
    Ok((c.c_d, c.beta_c, c.beta_s))
}

#[pyfunction]
fn threshold_report(py: Python<'_>, d: usize) -> PyResult<Bound<'_, PyDict>> {
    let r = stability::threshold_report(d).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("d", r.d)?;
    out.set_item("beta_c", r.beta_c)?;
    out.set_item("beta_s", r.beta_s)?;
    out.set_item("beta_0", r.beta_0)?;
    out.set_item("ordering", r.ordering.as_str())?;
    Ok(out)
}

#[pyfunction]
fn eigenvalue(beta: f64, k_norm: f64, d: usize) -> PyResult<f64> {
    stability::eigenvalue(beta, k_norm, d).map_err(err)
}

/// Integrates from `initial`; `stop` is `"horizon"`, `"l1_above"` or `"l2_below"` with threshold `tol`.
#[pyfunction]
#[pyo3(signature = (initial, beta, dt, tmax, tables, stop = "horizon", tol = 0.0, diagnostics_every = 10))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    initial: &PyField,
    beta: f64,
    dt: f64,
    tmax: f64,
    tables: &PyTables,
    stop: &str,
    tol: f64,
    diagnostics_every: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let grid = initial.inner.grid();
    let params = ModelParams::new(grid.dim(), beta, grid.n(), dt, tmax);
    let rule = match stop {
        "horizon" => StopRule::Horizon,
        "l1_above" => StopRule::L1Above(tol),
        "l2_below" => StopRule::L2Below(tol),
        other => return Err(PyValueError::new_err(format!("unknown stop rule {other:?}"))),
    };
    let recording = Recording { diagnostics_every, snapshots_every: None };
    let tr = solver::run(&initial.inner, &params, &tables.inner, rule, recording).map_err(err)?;
    let (reason, t_stop) = match tr.stop {
        StopReason::Horizon => ("horizon", tr.final_time),
        StopReason::L1Above { t } => ("l1_above", t),
        StopReason::L2Below { t } => ("l2_below", t),
        StopReason::ResidualBelow { t } => ("residual_below", t),
        StopReason::BlowUp { t } => ("blow_up", t),
    };
    let rows: Vec<Vec<f64>> = tr
        .diagnostics
        .iter()
        .map(|r| {
            let mut v = vec![r.t, r.mass, r.free_energy, r.dissipation, r.fisher, r.l1_dist, r.l2_dist];
            v.extend(&r.modes);
            v
        })
        .collect();
    let out = PyDict::new(py);
    out.set_item("stop", reason)?;
    out.set_item("stop_time", t_stop)?;
    out.set_item("final_time", tr.final_time)?;
    out.set_item("steps", tr.steps)?;
    out.set_item("columns", solver::DiagnosticsRow::csv_header(params.track_modes.len()))?;
    out.set_item("diagnostics", rows)?;
    out.set_item("final", Py::new(py, PyField { inner: tr.final_state })?)?;
    Ok(out)
}

/// Damped Kirkwood–Monroe iteration; returns `(field, converged, residual, iterations)`.
#[pyfunction]
#[pyo3(signature = (initial, beta, tables, damping = 0.5, tol = 1e-10, max_iter = 5000))]
fn steady_state(
    initial: &PyField,
    beta: f64,
    tables: &PyTables,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> PyResult<(PyField, bool, f64, usize)> {
    let fp = solver::kirkwood_monroe_fixed_point(&initial.inner, beta, &tables.inner, damping, tol, max_iter)
        .map_err(err)?;
    Ok((PyField { inner: fp.mu }, fp.converged, fp.residual, fp.iterations))
}

#[pyfunction]
fn mlhls_counterexample<'py>(
    py: Python<'py>,
    beta: f64,
    minimizer: &PyField,
    tables: &PyTables,
    n_values: Vec<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let d = minimizer.inner.grid().dim();
    let c = stability::mlhls_counterexample(d, beta, &minimizer.inner, &tables.inner, &n_values).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("eta_beta", c.eta_beta)?;
    out.set_item("interaction", c.interaction)?;
    out.set_item("lhs", c.lhs)?;
    out.set_item("eta", c.eta)?;
    out.set_item("n0", c.n0)?;
    out.set_item("rows", c.rows)?;
    Ok(out)
}

/// Unstable-mode expansion of a cosine perturbation up to a given order.
#[pyclass(name = "GrenierExpansion", module = "loggas")]
struct PyGrenier {
    inner: stability::GrenierExpansion,
}

#[pymethods]
impl PyGrenier {
    #[new]
    fn new(beta: f64, k: Vec<i64>, order: usize) -> PyResult<Self> {
        let inner = stability::GrenierExpansion::new(beta, k.len(), &k, order).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn growth_rate(&self) -> f64 {
        self.inner.lambda
    }

    fn validity_time(&self, eps: f64) -> f64 {
        self.inner.validity_time(eps)
    }

    fn l1_distance(&self, eps: f64, t: f64) -> f64 {
        self.inner.l1_distance(eps, t)
    }

    fn residual_bound(&self, eps: f64, t: f64) -> f64 {
        self.inner.residual_bound(eps, t)
    }

    #[pyo3(signature = (eps, c0 = 0.0))]
    fn escape_forecast(&self, eps: f64, c0: f64) -> PyResult<f64> {
        stability::instability_time_forecast(&self.inner, eps, c0).map_err(err)
    }
}

#[pymodule]
fn loggas(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTables>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_class::<PyGrenier>()?;
    m.add_function(wrap_pyfunction!(dimension_constants, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_report, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(mlhls_counterexample, m)?)?;
    Ok(())
}
