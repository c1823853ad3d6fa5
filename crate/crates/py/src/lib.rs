//! Python module `fastflow`: parameters, the comoving potential, and a
//! steppable simulation with metrics and text frames.

use std::path::PathBuf;

use fastflow_core::counterflow;
use fastflow_core::experiment::{self, ExperimentError};
use fastflow_core::metrics::{self, DeadlockDetector, MetricsRecord};
use fastflow_core::scenario::{self, ScenarioError};
use fastflow_core::{Model, RegionVariant, ScenarioConfig, SimState, Species};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: ExperimentError) -> PyErr {
    if e.exit_code() == 2 {
        PyOSError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn scenario_err(e: ScenarioError) -> PyErr {
    to_py(ExperimentError::from(e))
}

/// Counterflow coupling parameters; defaults are the reference values.
#[pyclass(name = "CounterflowParams", from_py_object)]
#[derive(Clone, Default)]
struct PyParams {
    inner: counterflow::CounterflowParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut p = PyParams::default();
        if let Some(kw) = kwargs {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                match key.as_str() {
                    "k_f" => p.inner.k_f = v.extract()?,
                    "n_max" => p.inner.n_max = v.extract()?,
                    "r_max" => p.inner.r_max = v.extract()?,
                    "h" => p.inner.h = v.extract()?,
                    "delta" => p.inner.delta = v.extract()?,
                    "a" => p.inner.a = v.extract()?,
                    "b" => p.inner.b = v.extract()?,
                    "fov_half_angle" => p.inner.fov_half_angle = v.extract()?,
                    "region_variant" => {
                        let name: String = v.extract()?;
                        p.inner.region_variant = RegionVariant::parse(&name)
                            .ok_or_else(|| PyValueError::new_err(format!("unknown region_variant `{name}`")))?;
                    }
                    other => return Err(PyValueError::new_err(format!("unknown parameter `{other}`"))),
                }
            }
        }
        p.inner.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(p)
    }

    #[getter]
    fn k_f(&self) -> f64 {
        self.inner.k_f
    }
    #[getter]
    fn n_max(&self) -> usize {
        self.inner.n_max
    }
    #[getter]
    fn r_max(&self) -> f64 {
        self.inner.r_max
    }
    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }
    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }
    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }
    #[getter]
    fn fov_half_angle(&self) -> f64 {
        self.inner.fov_half_angle
    }
    #[getter]
    fn region_variant(&self) -> &'static str {
        self.inner.region_variant.name()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "CounterflowParams(k_f={}, n_max={}, r_max={}, h={}, delta={}, a={}, b={}, fov_half_angle={}, region_variant='{}')",
            p.k_f,
            p.n_max,
            p.r_max,
            p.h,
            p.delta,
            p.a,
            p.b,
            p.fov_half_angle,
            p.region_variant.name()
        )
    }
}

/// Potential of an emitter at frame coordinates `(d_par, d_perp)`.
#[pyfunction]
#[pyo3(signature = (d_par, d_perp, speed, v_max, params=None))]
fn comoving_potential(d_par: f64, d_perp: f64, speed: f64, v_max: f64, params: Option<PyParams>) -> f64 {
    counterflow::comoving_potential(d_par, d_perp, speed, v_max, &params.unwrap_or_default().inner)
}

#[pyfunction]
fn sign_factor(v_i: (f64, f64), v_j: (f64, f64)) -> i8 {
    counterflow::sign_factor(v_i, v_j)
}

#[pyfunction]
fn rotate_to_agent_frame(direction: (f64, f64), offset: (f64, f64)) -> PyResult<(f64, f64)> {
    counterflow::rotate_to_agent_frame(direction, offset).ok_or_else(|| PyValueError::new_err("direction must be non-zero"))
}

fn record_dict<'py>(py: Python<'py>, r: &MetricsRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("round", r.round)?;
    d.set_item("n_agents", r.total.n_agents)?;
    d.set_item("mean_speed", r.total.mean_speed)?;
    d.set_item("flow", r.total.flow)?;
    d.set_item("flow_right", r.species[Species::Right.index()].flow)?;
    d.set_item("flow_left", r.species[Species::Left.index()].flow)?;
    d.set_item("lane_order", r.lane_order)?;
    d.set_item("deadlock", r.deadlock)?;
    Ok(d)
}

/// A running scenario built from configuration text (`key = value` lines).
#[pyclass]
struct Simulation {
    state: SimState,
    floor: usize,
    detector: DeadlockDetector,
    last: Option<MetricsRecord>,
}

#[pymethods]
impl Simulation {
    #[new]
    #[pyo3(signature = (config, base_dir=".", counterflow=true))]
    fn new(config: &str, base_dir: &str, counterflow: bool) -> PyResult<Self> {
        let cfg: ScenarioConfig = fastflow_core::parse_config(config).map_err(|e| scenario_err(e.into()))?;
        let model = if counterflow { Model::Counterflow } else { Model::Base };
        let state = scenario::build(&cfg, &PathBuf::from(base_dir)).map_err(scenario_err)?.with_model(model);
        Ok(Simulation {
            floor: state.grid.floor_count(),
            detector: DeadlockDetector::new(cfg.deadlock_window, cfg.deadlock_eps),
            state,
            last: None,
        })
    }

    /// Advances `rounds` rounds, measuring after each.
    #[pyo3(signature = (rounds=1))]
    fn step(&mut self, py: Python<'_>, rounds: u64) {
        py.detach(|| {
            for _ in 0..rounds {
                self.state.step();
                self.last = Some(metrics::measure(&self.state, self.floor, &mut self.detector));
            }
        })
    }

    #[getter]
    fn round(&self) -> u64 {
        self.state.round
    }

    #[getter]
    fn width(&self) -> i32 {
        self.state.grid.width()
    }

    #[getter]
    fn height(&self) -> i32 {
        self.state.grid.height()
    }

    /// `(id, x, y, species)` for every agent on the grid.
    fn positions(&self) -> Vec<(u32, i32, i32, &'static str)> {
        self.state
            .agents
            .iter()
            .map(|a| (a.id, a.pos.x, a.pos.y, a.species.name()))
            .collect()
    }

    /// Last round's displacement of every agent, in the order of `positions`.
    fn velocities(&self) -> Vec<(i32, i32)> {
        self.state.agents.iter().map(|a| (a.vel.dx, a.vel.dy)).collect()
    }

    fn render(&self) -> String {
        experiment::render(&self.state)
    }

    /// Metrics of the most recent round, or `None` before the first step.
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyDict>>> {
        self.last.as_ref().map(|r| record_dict(py, r)).transpose()
    }

    fn lane_order(&self) -> f64 {
        metrics::lane_order_parameter(&self.state.agents, self.state.grid.height())
    }

    fn check_invariants(&self) -> PyResult<()> {
        self.state.check_invariants().map_err(PyValueError::new_err)
    }
}

/// Fundamental diagram: one dict per density, averaged over `seeds` runs.
#[pyfunction]
#[pyo3(signature = (config, densities, seeds, base_dir=".", jobs=1))]
fn fd<'py>(
    py: Python<'py>,
    config: &str,
    densities: Vec<f64>,
    seeds: usize,
    base_dir: &str,
    jobs: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = fastflow_core::parse_config(config).map_err(|e| scenario_err(e.into()))?;
    let base = PathBuf::from(base_dir);
    let points = py
        .detach(|| experiment::fd_sweep(&cfg, &base, &densities, seeds, 0, jobs.max(1), Model::Counterflow))
        .map_err(to_py)?;
    points
        .iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("density", p.density)?;
            d.set_item("mean_flow", p.mean_flow)?;
            d.set_item("std_flow", p.std_flow)?;
            d.set_item("mean_speed", p.mean_speed)?;
            d.set_item("mean_lane_order", p.mean_lane_order)?;
            d.set_item("deadlock_fraction", p.deadlock_fraction)?;
            d.set_item("n_seeds", p.n_seeds)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn fastflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<Simulation>()?;
    m.add_function(wrap_pyfunction!(comoving_potential, m)?)?;
    m.add_function(wrap_pyfunction!(sign_factor, m)?)?;
    m.add_function(wrap_pyfunction!(rotate_to_agent_frame, m)?)?;
    m.add_function(wrap_pyfunction!(fd, m)?)?;
    Ok(())
}
