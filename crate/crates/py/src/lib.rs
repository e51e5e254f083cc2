//! Python bindings for the co-scheduling simulator: configuration,
//! single runs, scheduler × seed experiments, and the underlying
//! solvers and rate laws for desk checks from a notebook.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use coexsched::channel;
use coexsched::embb_sched;
use coexsched::lp::{Constraint, LinearProgram, LpOutcome, Relation};
use coexsched::model::{apply_override, SystemConfig};
use coexsched::sim::{self, ExperimentReport, RunResult, SchedulerId, SimOptions};
use coexsched::traffic;
use coexsched::transport;

fn value_err<E: std::fmt::Display>(err: E) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn parse_scheduler(name: &str) -> PyResult<SchedulerId> {
    name.parse().map_err(value_err)
}

/// Validated cell description. Instances are immutable; derive changed
/// ones with `with_override`.
#[pyclass(module = "coexsched_py", skip_from_py_object)]
struct Config {
    inner: SystemConfig,
}

#[pymethods]
impl Config {
    /// The built-in reference cell.
    #[new]
    fn new() -> PyResult<Self> {
        SystemConfig::default()
            .validate()
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Loads `key = value` lines from a file.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        SystemConfig::from_file(Path::new(path))
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Returns a copy with one key changed and re-validated, e.g.
    /// `cfg.with_override("arrival_std", "10")`.
    fn with_override(&self, key: &str, value: &str) -> PyResult<Self> {
        apply_override(&self.inner, key, value)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn n_embb(&self) -> usize {
        self.inner.n_embb
    }

    #[getter]
    fn n_rb(&self) -> usize {
        self.inner.n_rb
    }

    #[getter]
    fn n_slots(&self) -> usize {
        self.inner.n_slots
    }

    #[getter]
    fn minislots_per_slot(&self) -> usize {
        self.inner.minislots_per_slot
    }

    #[getter]
    fn bandwidth_hz(&self) -> f64 {
        self.inner.bandwidth_hz
    }

    #[getter]
    fn arrival_mean(&self) -> f64 {
        self.inner.arrival_mean
    }

    #[getter]
    fn arrival_std(&self) -> f64 {
        self.inner.arrival_std
    }

    #[getter]
    fn payload_bytes(&self) -> u32 {
        self.inner.payload_bytes
    }

    #[getter]
    fn reliability_eps(&self) -> f64 {
        self.inner.reliability_eps
    }

    #[getter]
    fn decode_err(&self) -> f64 {
        self.inner.decode_err
    }

    #[getter]
    fn cell_radius_m(&self) -> f64 {
        self.inner.cell_radius_m
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(n_embb={}, n_rb={}, n_slots={}, arrival_mean={}, arrival_std={}, payload_bytes={})",
            self.inner.n_embb,
            self.inner.n_rb,
            self.inner.n_slots,
            self.inner.arrival_mean,
            self.inner.arrival_std,
            self.inner.payload_bytes,
        )
    }
}

/// Metrics and counters of one simulated run.
#[pyclass(module = "coexsched_py")]
struct Run {
    inner: RunResult,
}

#[pymethods]
impl Run {
    #[getter]
    fn scheduler(&self) -> String {
        self.inner.scheduler.to_string()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn mear_bits(&self) -> f64 {
        self.inner.mear_bits
    }

    #[getter]
    fn fairness(&self) -> f64 {
        self.inner.fairness
    }

    #[getter]
    fn per_ue_rate(&self) -> Vec<f64> {
        self.inner.per_ue_rate.clone()
    }

    #[getter]
    fn violation_count(&self) -> u64 {
        self.inner.violation_count
    }

    #[getter]
    fn arrivals(&self) -> u64 {
        self.inner.diagnostics.arrivals
    }

    #[getter]
    fn served(&self) -> u64 {
        self.inner.diagnostics.served
    }

    #[getter]
    fn boundary_served(&self) -> u64 {
        self.inner.diagnostics.boundary_served
    }

    #[getter]
    fn dropped_arrivals(&self) -> u64 {
        self.inner.diagnostics.dropped_arrivals
    }

    fn __repr__(&self) -> String {
        format!(
            "Run(scheduler='{}', seed={}, mear_bits={}, fairness={}, violations={})",
            self.inner.scheduler,
            self.inner.seed,
            self.inner.mear_bits,
            self.inner.fairness,
            self.inner.violation_count,
        )
    }
}

/// Results of a scheduler × seed sweep.
#[pyclass(module = "coexsched_py")]
struct Experiment {
    inner: ExperimentReport,
}

#[pymethods]
impl Experiment {
    /// Mean worst-user rate in bits per slot, or None if every run of
    /// that scheduler failed.
    fn mean_mear(&self, scheduler: &str) -> PyResult<Option<f64>> {
        Ok(self.inner.mean_mear(parse_scheduler(scheduler)?))
    }

    fn mean_fairness(&self, scheduler: &str) -> PyResult<Option<f64>> {
        Ok(self.inner.mean_fairness(parse_scheduler(scheduler)?))
    }

    /// Pooled latency violations divided by pooled arrivals.
    fn violation_rate(&self, scheduler: &str) -> PyResult<Option<f64>> {
        Ok(self.inner.violation_rate(parse_scheduler(scheduler)?))
    }

    /// Empirical distribution of the worst-user rate: ascending
    /// (value, cumulative probability) pairs.
    fn ecdf(&self, scheduler: &str) -> PyResult<Vec<(f64, f64)>> {
        Ok(self.inner.ecdf(parse_scheduler(scheduler)?))
    }

    /// Successful runs of one scheduler, in seed order.
    fn runs(&self, scheduler: &str) -> PyResult<Vec<Run>> {
        let scheduler = parse_scheduler(scheduler)?;
        Ok(self
            .inner
            .cells
            .iter()
            .filter(|cell| cell.scheduler == scheduler)
            .filter_map(|cell| cell.result.as_ref().ok())
            .map(|inner| Run {
                inner: inner.clone(),
            })
            .collect())
    }

    /// Failed cells as (scheduler, seed, message) tuples.
    fn failures(&self) -> Vec<(String, u64, String)> {
        self.inner
            .cells
            .iter()
            .filter_map(|cell| {
                cell.result
                    .as_ref()
                    .err()
                    .map(|e| (cell.scheduler.to_string(), cell.seed, e.to_string()))
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Experiment(cells={})", self.inner.cells.len())
    }
}

/// Simulates one cell and returns its metrics.
#[pyfunction]
#[pyo3(signature = (config, scheduler, seed, literal_eq10=false))]
fn run_simulation(config: &Config, scheduler: &str, seed: u64, literal_eq10: bool) -> PyResult<Run> {
    let options = SimOptions {
        literal_eq10,
        ..SimOptions::default()
    };
    sim::run_simulation(&config.inner, parse_scheduler(scheduler)?, seed, &options)
        .map(|inner| Run { inner })
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Runs every scheduler on every seed with paired randomness.
#[pyfunction]
#[pyo3(signature = (config, schedulers, seeds, literal_eq10=false))]
fn run_experiment(
    config: &Config,
    schedulers: Vec<String>,
    seeds: Vec<u64>,
    literal_eq10: bool,
) -> PyResult<Experiment> {
    let schedulers = schedulers
        .iter()
        .map(|s| parse_scheduler(s))
        .collect::<PyResult<Vec<_>>>()?;
    let options = SimOptions {
        literal_eq10,
        ..SimOptions::default()
    };
    Ok(Experiment {
        inner: sim::run_experiment(&config.inner, &schedulers, &seeds, &options),
    })
}

/// Minimal-cost integral flow from demand rows to supply columns.
/// Returns (assignment, cost).
#[pyfunction]
fn solve_transport(
    cost: Vec<Vec<f64>>,
    demand: Vec<u64>,
    supply: Vec<u64>,
) -> PyResult<(Vec<Vec<u64>>, f64)> {
    transport::solve_transport(cost, demand, supply)
        .map(|s| (s.assignment, s.cost))
        .map_err(value_err)
}

/// Minimizes `objective · x` subject to rows of (coeffs, relation, rhs)
/// with relation one of "<=", "==", ">=". Bounds default to x >= 0.
/// Returns (value, solution).
#[pyfunction]
#[pyo3(signature = (objective, constraints, bounds=None))]
fn solve_lp(
    objective: Vec<f64>,
    constraints: Vec<(Vec<f64>, String, f64)>,
    bounds: Option<Vec<(f64, Option<f64>)>>,
) -> PyResult<(f64, Vec<f64>)> {
    let n = objective.len();
    let constraints = constraints
        .into_iter()
        .map(|(coeffs, relation, rhs)| {
            let relation = match relation.as_str() {
                "<=" => Relation::Le,
                "==" | "=" => Relation::Eq,
                ">=" => Relation::Ge,
                other => return Err(value_err(format!("unknown relation `{other}`"))),
            };
            Ok(Constraint {
                coeffs,
                relation,
                rhs,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let bounds = bounds.map_or_else(
        || vec![(0.0, f64::INFINITY); n],
        |b| {
            b.into_iter()
                .map(|(lo, hi)| (lo, hi.unwrap_or(f64::INFINITY)))
                .collect()
        },
    );
    let lp = LinearProgram {
        objective,
        constraints,
        bounds,
    };
    match coexsched::lp::solve_lp(&lp) {
        Ok(LpOutcome::Optimal { value, solution }) => Ok((value, solution)),
        Ok(other) => Err(value_err(format!("{other:?}"))),
        Err(err) => Err(value_err(err)),
    }
}

/// Upper quantile of the standard normal: the x with Q(x) = p.
#[pyfunction]
fn q_inv(p: f64) -> PyResult<f64> {
    channel::q_inv(p).map_err(value_err)
}

/// Admission cap n with P(arrivals > n) <= eps for N(mean, std²)
/// arrivals truncated at zero.
#[pyfunction]
fn admission_quota(mean: f64, std: f64, eps: f64) -> PyResult<u64> {
    traffic::admission_quota(mean, std, eps).map_err(value_err)
}

/// Jain index (Σx)² / (n·Σx²) of per-user rates.
#[pyfunction]
fn jain_fairness(rates: Vec<f64>) -> PyResult<f64> {
    sim::jain_fairness(&rates).map_err(value_err)
}

/// Minimum of the per-user expected rates.
#[pyfunction]
fn mear(rates: Vec<f64>) -> f64 {
    sim::mear(&rates)
}

/// Concave integrality penalty of a relaxed allocation matrix.
#[pyfunction]
fn penalty_value(alpha: Vec<Vec<f64>>, eps: f64, p: f64) -> f64 {
    embb_sched::penalty_value(&alpha, eps, p)
}

/// Entrywise gradient of the integrality penalty.
#[pyfunction]
fn penalty_gradient(alpha: Vec<Vec<f64>>, eps: f64, p: f64) -> PyResult<Vec<Vec<f64>>> {
    embb_sched::penalty_gradient(&alpha, eps, p).map_err(value_err)
}

/// Slot-level rate of one resource block at the given link gain.
#[pyfunction]
fn embb_rb_rate(gain: f64, p_tx_mw: f64, n0_mw_hz: f64, b_hz: f64, slot_s: f64) -> f64 {
    channel::embb_rb_rate(gain, p_tx_mw, n0_mw_hz, b_hz, slot_s)
}

/// Finite-blocklength mini-slot rate of one resource block.
#[pyfunction]
fn urllc_rb_rate(
    gain: f64,
    p_tx_mw: f64,
    n0_mw_hz: f64,
    b_hz: f64,
    minislot_s: f64,
    decode_err: f64,
    blocklength: f64,
) -> f64 {
    channel::urllc_rb_rate(gain, p_tx_mw, n0_mw_hz, b_hz, minislot_s, decode_err, blocklength)
}

#[pymodule]
fn coexsched_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Config>()?;
    m.add_class::<Run>()?;
    m.add_class::<Experiment>()?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(solve_transport, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lp, m)?)?;
    m.add_function(wrap_pyfunction!(q_inv, m)?)?;
    m.add_function(wrap_pyfunction!(admission_quota, m)?)?;
    m.add_function(wrap_pyfunction!(jain_fairness, m)?)?;
    m.add_function(wrap_pyfunction!(mear, m)?)?;
    m.add_function(wrap_pyfunction!(penalty_value, m)?)?;
    m.add_function(wrap_pyfunction!(penalty_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(embb_rb_rate, m)?)?;
    m.add_function(wrap_pyfunction!(urllc_rb_rate, m)?)?;
    m.add(
        "SCHEDULERS",
        SchedulerId::ALL.map(|s| s.to_string()).to_vec(),
    )?;
    Ok(())
}
