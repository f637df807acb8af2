//! Python bindings for the `ddfv` solver library.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ddfv::assembly::{DiscreteState, ProblemSpec};
use ddfv::config::RunConfig;
use ddfv::diagnostics::{self, StepDiagnostics};
use ddfv::experiments::{self, ConvergenceCase};
use ddfv::fluxes::{self, FaceState};
use ddfv::solver::{self, SolverConfig, TimeGrid};
use ddfv::{physics, AdmissibleMesh, DdfvError, SchemeKind};

create_exception!(pyddfv, SolverError, PyRuntimeError, "The nonlinear or linear solver failed.");

fn to_py(e: DdfvError) -> PyErr {
    match e {
        DdfvError::InvalidArgument(_) | DdfvError::Domain { .. } | DdfvError::Config(_) | DdfvError::Admissibility(_) => {
            PyValueError::new_err(e.to_string())
        }
        DdfvError::SolverFailure { .. } | DdfvError::SingularSystem(_) => SolverError::new_err(e.to_string()),
        DdfvError::Io(_) => PyOSError::new_err(e.to_string()),
    }
}

fn scheme(name: &str) -> PyResult<SchemeKind> {
    name.parse().map_err(to_py)
}

fn solver_config(newton_tol: f64, max_newton_iters: usize) -> PyResult<SolverConfig> {
    let config = SolverConfig { newton_tol, max_newton_iters, ..SolverConfig::default() };
    config.validate().map_err(to_py)?;
    Ok(config)
}

#[pyclass(frozen, name = "Mesh")]
struct PyMesh(Arc<AdmissibleMesh>);

#[pymethods]
impl PyMesh {
    /// Uniform mesh of `(0, length)` with boundary regions `left` and `right`.
    #[staticmethod]
    fn uniform_1d(length: f64, n_cells: usize) -> PyResult<Self> {
        Ok(PyMesh(Arc::new(AdmissibleMesh::uniform_1d(length, n_cells, "left", "right").map_err(to_py)?)))
    }

    /// Triangulated FET rectangle after `n_ref` uniform refinements.
    #[staticmethod]
    fn fet(n_ref: u32) -> PyResult<Self> {
        Ok(PyMesh(Arc::new(experiments::fet_mesh(n_ref).map_err(to_py)?)))
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.0.n_cells()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    #[getter]
    fn size(&self) -> f64 {
        self.0.size()
    }

    #[getter]
    fn regions(&self) -> Vec<String> {
        self.0.regions().to_vec()
    }

    #[getter]
    fn centers(&self) -> Vec<(f64, f64)> {
        self.0.cells().iter().map(|c| (c.center[0], c.center[1])).collect()
    }

    #[getter]
    fn measures(&self) -> Vec<f64> {
        self.0.cells().iter().map(|c| c.measure).collect()
    }

    /// Admissibility violations, empty for a valid mesh.
    fn violations(&self) -> Vec<String> {
        self.0.validate().iter().map(|v| format!("{v:?}")).collect()
    }

    fn __repr__(&self) -> String {
        format!("Mesh(dimension={}, n_cells={}, size={:e})", self.0.dimension(), self.0.n_cells(), self.0.size())
    }
}

#[pyclass(frozen, name = "State")]
struct PyState(DiscreteState);

#[pymethods]
impl PyState {
    #[getter]
    fn c(&self) -> Vec<f64> {
        self.0.concentrations()
    }

    #[getter]
    fn phi(&self) -> Vec<f64> {
        self.0.phi.clone()
    }

    #[getter]
    fn vacancies(&self) -> Vec<f64> {
        self.0.vacancies()
    }

    fn __len__(&self) -> usize {
        self.0.n_cells()
    }
}

#[pyclass(frozen, get_all, skip_from_py_object, name = "Diagnostics")]
#[derive(Clone)]
struct PyDiagnostics {
    time: f64,
    energy: f64,
    dissipation: f64,
    mass: f64,
    c_min: f64,
    c_max: f64,
    vacancy_min: f64,
    newton_iters: usize,
}

impl From<StepDiagnostics> for PyDiagnostics {
    fn from(d: StepDiagnostics) -> Self {
        PyDiagnostics {
            time: d.time,
            energy: d.energy,
            dissipation: d.dissipation,
            mass: d.mass,
            c_min: d.c_min,
            c_max: d.c_max,
            vacancy_min: d.vacancy_min,
            newton_iters: d.newton_iters,
        }
    }
}

#[pyclass(frozen, name = "Trajectory")]
struct PyTrajectory(solver::Trajectory);

#[pymethods]
impl PyTrajectory {
    /// Diagnostics at `t = 0` followed by one entry per accepted step.
    #[getter]
    fn diagnostics(&self) -> Vec<PyDiagnostics> {
        std::iter::once(self.0.initial_diagnostics)
            .chain(self.0.steps.iter().map(|s| s.diagnostics))
            .map(PyDiagnostics::from)
            .collect()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.0.steps.iter().map(|s| s.time)).collect()
    }

    /// State after step `i`; `0` is the initial state and negative indices count from the end.
    fn state(&self, i: isize) -> PyResult<PyState> {
        let n = self.0.steps.len() as isize + 1;
        let j = if i < 0 { i + n } else { i };
        match j {
            0 => Ok(PyState(self.0.initial.clone())),
            j if (1..n).contains(&j) => Ok(PyState(self.0.steps[j as usize - 1].state.clone())),
            _ => Err(pyo3::exceptions::PyIndexError::new_err(format!("state {i} out of range"))),
        }
    }

    fn __len__(&self) -> usize {
        self.0.steps.len() + 1
    }
}

#[pyclass(frozen, name = "Problem")]
struct PyProblem(ProblemSpec);

#[pymethods]
impl PyProblem {
    /// Blocking contacts on `(0, length)` with constant initial concentration `c0`.
    #[staticmethod]
    #[pyo3(signature = (scheme, c0, phi_left, phi_right = 0.0, length = 50.0, n_cells = 100))]
    fn evolution(scheme: &str, c0: f64, phi_left: f64, phi_right: f64, length: f64, n_cells: usize) -> PyResult<Self> {
        let spec = experiments::evolution_spec(self::scheme(scheme)?, length, n_cells, c0, phi_left, phi_right).map_err(to_py)?;
        Ok(PyProblem(spec))
    }

    /// Concentration contacts with zero potential on `(0, length)`.
    #[staticmethod]
    #[pyo3(signature = (scheme, c_left, c_right, length = 50.0, n_cells = 100))]
    fn stationary(scheme: &str, c_left: f64, c_right: f64, length: f64, n_cells: usize) -> PyResult<Self> {
        let spec = experiments::stationary_spec(self::scheme(scheme)?, length, n_cells, c_left, c_right).map_err(to_py)?;
        Ok(PyProblem(spec))
    }

    #[staticmethod]
    fn fet(mesh: &PyMesh, scheme: &str, u_gate: f64) -> PyResult<Self> {
        let spec = experiments::fet_spec(Arc::clone(&mesh.0), self::scheme(scheme)?, u_gate).map_err(to_py)?;
        Ok(PyProblem(spec))
    }

    #[getter]
    fn scheme(&self) -> &'static str {
        self.0.scheme().name()
    }

    #[getter]
    fn mesh(&self) -> PyMesh {
        PyMesh(self.0.shared_mesh())
    }

    #[pyo3(signature = (newton_tol = 1e-10, max_newton_iters = 50))]
    fn solve_stationary(&self, py: Python<'_>, newton_tol: f64, max_newton_iters: usize) -> PyResult<PyState> {
        let config = solver_config(newton_tol, max_newton_iters)?;
        let (state, _) = py.detach(|| solver::solve_stationary(&self.0, &config)).map_err(to_py)?;
        Ok(PyState(state))
    }

    /// Backward Euler on the geometric grid `t_i = t1 * delta^i` up to `t_end`.
    #[pyo3(signature = (t1 = 1e-4, delta = 1.15, t_end = 1000.0, newton_tol = 1e-10, max_newton_iters = 50))]
    fn evolve(&self, py: Python<'_>, t1: f64, delta: f64, t_end: f64, newton_tol: f64, max_newton_iters: usize) -> PyResult<PyTrajectory> {
        let config = solver_config(newton_tol, max_newton_iters)?;
        let grid = TimeGrid::Geometric { t1, delta, t_end };
        let traj = py.detach(|| experiments::run_evolution(&self.0, &grid, &config)).map_err(to_py)?;
        Ok(PyTrajectory(traj))
    }

    fn energy(&self, state: &PyState) -> f64 {
        diagnostics::discrete_energy(&self.0, &state.0)
    }

    fn dissipation(&self, state: &PyState) -> f64 {
        diagnostics::total_dissipation(&self.0, &state.0)
    }

    fn mass(&self, state: &PyState) -> f64 {
        diagnostics::mass(self.0.mesh(), &state.0)
    }

    /// Carrier current leaving through the boundary region `contact`.
    fn current(&self, state: &PyState, contact: &str) -> PyResult<f64> {
        diagnostics::terminal_current(&self.0, &state.0, contact).map_err(to_py)
    }
}

/// Numerical flux from `K` to `L` per unit transmissibility.
#[pyfunction]
fn flux(scheme: &str, c_k: f64, c_l: f64, phi_k: f64, phi_l: f64) -> PyResult<f64> {
    let s = FaceState::new(c_k, c_l, phi_k, phi_l).map_err(to_py)?;
    Ok(fluxes::flux(self::scheme(scheme)?, &s))
}

#[pyfunction]
fn face_concentration(scheme: &str, c_k: f64, c_l: f64, phi_k: f64, phi_l: f64) -> PyResult<f64> {
    let s = FaceState::new(c_k, c_l, phi_k, phi_l).map_err(to_py)?;
    Ok(fluxes::face_concentration(self::scheme(scheme)?, &s))
}

#[pyfunction]
fn chemical_potential(c: f64) -> PyResult<f64> {
    physics::chemical_potential(c).map_err(to_py)
}

#[pyfunction]
fn inverse_chemical_potential(x: f64) -> f64 {
    physics::inverse_chemical_potential(x)
}

#[pyfunction]
fn bernoulli(u: f64) -> f64 {
    physics::bernoulli(u)
}

/// Rows `(dphi, centered, sedan, activity, bess_ch)`.
#[pyfunction]
#[pyo3(signature = (c_k = 0.3, c_l = 0.7, span = 10.0, rows = 401))]
fn face_concentration_table(c_k: f64, c_l: f64, span: f64, rows: usize) -> PyResult<Vec<(f64, f64, f64, f64, f64)>> {
    let table = experiments::face_concentration_table(c_k, c_l, span, rows).map_err(to_py)?;
    Ok(table.into_iter().map(|r| (r.dphi, r.centered, r.sedan, r.activity, r.bess_ch)).collect())
}

/// Stationary refinement study; rows `(scheme, n_cells, h, l2, h1)`.
#[pyfunction]
#[pyo3(signature = (schemes, grids, reference_cells, c_left = 1e-3, c_right = 0.999))]
fn convergence_study(
    py: Python<'_>,
    schemes: Vec<String>,
    grids: Vec<usize>,
    reference_cells: usize,
    c_left: f64,
    c_right: f64,
) -> PyResult<Vec<(String, usize, f64, f64, f64)>> {
    let schemes = schemes.iter().map(|s| scheme(s)).collect::<PyResult<Vec<_>>>()?;
    let case = ConvergenceCase::Stationary { c_left, c_right };
    let study = py
        .detach(|| experiments::convergence_study(&case, &schemes, &grids, reference_cells, &SolverConfig::default()))
        .map_err(to_py)?;
    Ok(study.rows.into_iter().map(|r| (r.scheme.name().to_string(), r.n_cells, r.h, r.l2, r.h1)).collect())
}

/// Gate sweep on `mesh`; pairs `(u_gate, source current)`.
#[pyfunction]
fn fet_sweep(py: Python<'_>, mesh: &PyMesh, scheme: &str, gates: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    let scheme = self::scheme(scheme)?;
    let mesh = Arc::clone(&mesh.0);
    let points = py.detach(|| experiments::fet_sweep(mesh, scheme, &gates, &SolverConfig::default())).map_err(to_py)?;
    Ok(points.into_iter().map(|p| (p.u_gate, p.current)).collect())
}

/// Runs a TOML run configuration as the `ddfv` command line would and
/// returns the summary lines.
#[pyfunction]
fn run_config(py: Python<'_>, toml: &str) -> PyResult<Vec<String>> {
    let config = RunConfig::from_toml(toml).map_err(to_py)?;
    let report = py.detach(|| ddfv::runs::execute(&config)).map_err(to_py)?;
    Ok(report.lines)
}

#[pymodule]
fn pyddfv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add("SCHEMES", SchemeKind::ALL.iter().map(|s| s.name()).collect::<Vec<_>>())?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyDiagnostics>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(flux, m)?)?;
    m.add_function(wrap_pyfunction!(face_concentration, m)?)?;
    m.add_function(wrap_pyfunction!(chemical_potential, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_chemical_potential, m)?)?;
    m.add_function(wrap_pyfunction!(bernoulli, m)?)?;
    m.add_function(wrap_pyfunction!(face_concentration_table, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(fet_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
