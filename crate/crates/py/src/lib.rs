use maglorentz::boltzmann_process as gb;
use maglorentz::cli::{self, ExperimentKind};
use maglorentz::error::Error;
use maglorentz::geometry::{self, Disk, ParticleState, PlanarPoint};
use maglorentz::kinetic_solver::{self as ks, KineticParams, SpectralGrid};
use maglorentz::lorentz_sim::{self, EtaRule};
use maglorentz::medium::{self, ObstacleField, ScalingParams};
use maglorentz::operators as ops;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter { .. } | Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Serializable results cross the boundary as plain Python objects.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Regime parameters `(ε, μ, η, |B|)` with derived quantities.
#[pyclass(name = "ScalingParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScaling(ScalingParams);

#[pymethods]
impl PyScaling {
    #[new]
    fn new(eps: f64, mu: f64, eta: f64, b_field: f64) -> PyResult<Self> {
        medium::scaling_from(eps, mu, eta, b_field).map(Self).map_err(py_err)
    }
    #[getter]
    fn mu_eff(&self) -> f64 {
        self.0.mu_eff
    }
    #[getter]
    fn larmor_radius(&self) -> Option<f64> {
        self.0.larmor_radius
    }
    #[getter]
    fn larmor_period(&self) -> Option<f64> {
        self.0.larmor_period
    }
    fn circling_probability(&self) -> Option<f64> {
        self.0.circling_probability()
    }
    fn warnings(&self) -> Vec<String> {
        self.0.warnings()
    }
    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0)
    }
    fn __repr__(&self) -> String {
        format!(
            "ScalingParams(eps={}, mu={}, eta={}, b_field={})",
            self.0.eps, self.0.mu, self.0.eta, self.0.b_field
        )
    }
}

/// Lazily generated Poisson obstacle field.
#[pyclass(name = "ObstacleField", frozen)]
struct PyField(ObstacleField);

#[pymethods]
impl PyField {
    #[new]
    fn new(params: &PyScaling, seed: u64) -> Self {
        Self(ObstacleField::new(params.0, seed))
    }
    fn obstacles_in_cell(&self, i: i64, j: i64) -> Vec<(f64, f64)> {
        self.0.obstacles_in_cell((i, j)).into_iter().map(|p| (p.x, p.y)).collect()
    }
    fn is_admissible_start(&self, x: f64, y: f64) -> bool {
        self.0.is_admissible_start(PlanarPoint::new(x, y))
    }
    /// Event-driven trajectory from `(x, y)` with velocity angle `angle`.
    #[pyo3(signature = (x, y, angle, t_max, sample_times=Vec::new()))]
    fn simulate(&self, py: Python<'_>, x: f64, y: f64, angle: f64, t_max: f64, sample_times: Vec<f64>) -> PyResult<Py<PyAny>> {
        let start = ParticleState::new(PlanarPoint::new(x, y), angle);
        let out = py
            .detach(|| lorentz_sim::simulate_trajectory(&self.0, start, t_max, &sample_times))
            .map_err(py_err)?;
        to_py(py, &out)
    }
}

/// First time in `(0, horizon]` at which the orbit enters the disk, or None.
#[pyfunction]
fn first_hit(x: f64, y: f64, angle: f64, b_field: f64, cx: f64, cy: f64, radius: f64, horizon: f64) -> PyResult<Option<f64>> {
    let state = ParticleState::new(PlanarPoint::new(x, y), angle);
    let disk = Disk { center: PlanarPoint::new(cx, cy), radius };
    Ok(geometry::first_arc_disk_hit(&state, b_field, &disk, horizon).map_err(py_err)?.map(|h| h.time))
}

#[pyfunction]
fn deflection(impact: f64) -> PyResult<f64> {
    geometry::deflection_from_impact(impact).map_err(py_err)
}

/// Fourier multipliers `λ_0..λ_modes` of `L^G` (of `L` when `b_field` is 0).
#[pyfunction]
#[pyo3(signature = (mu, b_field, modes=ops::DEFAULT_MODES))]
fn lg_multipliers(mu: f64, b_field: f64, modes: usize) -> PyResult<Vec<f64>> {
    let op = ops::build_lg(mu, ops::period_from_field(b_field), modes, None, ops::DEFAULT_QUADRATURE_ORDER).map_err(py_err)?;
    Ok((0..=modes as i64).map(|m| op.multiplier(m)).collect())
}

#[pyfunction]
#[pyo3(signature = (mu, b_field, modes=32))]
fn diffusion_coefficient(mu: f64, b_field: f64, modes: usize) -> PyResult<f64> {
    let op = ops::build_lg(mu, ops::period_from_field(b_field), modes, None, ops::DEFAULT_QUADRATURE_ORDER).map_err(py_err)?;
    ops::diffusion_coefficient(&op).map_err(py_err)
}

/// Solve `L^G h = g` for zero-mean grid values `g` by the chosen route.
#[pyfunction]
#[pyo3(signature = (mu, period, g, route="direct", tol=1e-12))]
fn invert_lg(mu: f64, period: f64, g: Vec<f64>, route: &str, tol: f64) -> PyResult<Vec<f64>> {
    match route {
        "direct" => {
            let op = ops::build_lg(mu, period, g.len() / 2, None, ops::DEFAULT_QUADRATURE_ORDER).map_err(py_err)?;
            ops::invert_lg_direct_on_grid(&op, &g).map_err(py_err)
        }
        "neumann" => ops::invert_lg_neumann(mu, period, &g, tol).map(|s| s.values).map_err(py_err),
        "split" => ops::invert_split_series(mu, period, &g, tol).map(|s| s.values).map_err(py_err),
        other => Err(PyValueError::new_err(format!("unknown route {other:?}"))),
    }
}

#[pyfunction]
fn threshold(py: Python<'_>) -> PyResult<Py<PyAny>> {
    to_py(py, &ops::invertibility_threshold())
}

/// Velocity-angle path of the generalized Boltzmann process on a time grid.
#[pyfunction]
fn sample_path(mu: f64, period: f64, angle: f64, t_max: f64, times: Vec<f64>, seed: u64) -> PyResult<(Vec<f64>, bool)> {
    let path = gb::sample_velocity_path(mu, period, angle, t_max, seed).map_err(py_err)?;
    Ok((times.iter().map(|&t| path.angle_at(t)).collect(), path.circling))
}

#[pyfunction]
#[pyo3(signature = (mu, period, n_paths, seed, t_cut=12.0, dt=0.01))]
fn green_kubo(py: Python<'_>, mu: f64, period: f64, n_paths: usize, seed: u64, t_cut: f64, dt: f64) -> PyResult<Py<PyAny>> {
    let est = py.detach(|| gb::green_kubo_mc(mu, period, n_paths, t_cut, dt, seed)).map_err(py_err)?;
    to_py(py, &est)
}

#[pyfunction]
fn msd(py: Python<'_>, params: &PyScaling, replicas: usize, times: Vec<f64>, seed: u64) -> PyResult<Py<PyAny>> {
    let table = py.detach(|| lorentz_sim::msd_estimate(&params.0, replicas, &times, seed)).map_err(py_err)?;
    to_py(py, &table)
}

#[pyfunction]
fn event_rates(py: Python<'_>, eps_list: Vec<f64>, eta: f64, mu: f64, b_field: f64, t: f64, replicas: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let study = py
        .detach(|| lorentz_sim::event_rate_study(&eps_list, &EtaRule::Fixed(eta), mu, b_field, t, replicas, seed))
        .map_err(py_err)?;
    to_py(py, &study)
}

/// Kinetic solve from a cosine density; returns the diagnostics rows.
#[pyfunction]
#[pyo3(signature = (mu, b_field, eta, t_end, amplitude=0.5, n_x=1, n_v=64, n_diagnostics=10))]
fn kinetic(
    py: Python<'_>,
    mu: f64,
    b_field: f64,
    eta: f64,
    t_end: f64,
    amplitude: f64,
    n_x: usize,
    n_v: usize,
    n_diagnostics: usize,
) -> PyResult<Py<PyAny>> {
    let params = KineticParams::new(mu, b_field, eta).map_err(py_err)?;
    let grid = SpectralGrid::new(n_x, n_v, std::f64::consts::TAU).map_err(py_err)?;
    let out = py
        .detach(|| ks::solve(&params, &ks::cosine_density(grid, amplitude), t_end, None, n_diagnostics, false))
        .map_err(py_err)?;
    to_py(py, &out.diagnostics)
}

/// Validate and execute a configuration; returns `(csv, summary)`.
#[pyfunction]
#[pyo3(signature = (text, experiment=None))]
fn run_config(py: Python<'_>, text: &str, experiment: Option<&str>) -> PyResult<(String, Py<PyAny>)> {
    let kind = experiment
        .map(|name| ExperimentKind::from_name(name).ok_or_else(|| PyValueError::new_err(format!("unknown experiment {name:?}"))))
        .transpose()?;
    let config = cli::validate(text, kind).map_err(py_err)?;
    let out = py.detach(|| cli::execute(&config)).map_err(py_err)?;
    Ok((out.table.to_csv(), to_py(py, &cli::summary_json(&config, &out))?))
}

#[pymodule]
fn maglorentz_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", cli::VERSION)?;
    m.add_class::<PyScaling>()?;
    m.add_class::<PyField>()?;
    m.add_function(wrap_pyfunction!(first_hit, m)?)?;
    m.add_function(wrap_pyfunction!(deflection, m)?)?;
    m.add_function(wrap_pyfunction!(lg_multipliers, m)?)?;
    m.add_function(wrap_pyfunction!(diffusion_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(invert_lg, m)?)?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(sample_path, m)?)?;
    m.add_function(wrap_pyfunction!(green_kubo, m)?)?;
    m.add_function(wrap_pyfunction!(msd, m)?)?;
    m.add_function(wrap_pyfunction!(event_rates, m)?)?;
    m.add_function(wrap_pyfunction!(kinetic, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
