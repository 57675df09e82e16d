//! Python bindings: thin wrappers returning plain lists and dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use greedy_ldp::deviations::{self, Side};
use greedy_ldp::dynamics::{self, RunSeed};
use greedy_ldp::montecarlo::{self, oracle};
use greedy_ldp::odeflow::{self, Trajectory};
use greedy_ldp::{hamiltonian, legendre, Covector, DegreeDistribution, DegreeSequence, Error, MacroState};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::InvalidInput(_) | Error::Contract(_) => PyValueError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn side(text: &str) -> PyResult<Side> {
    text.parse().map_err(to_py)
}

fn trajectory_dict<'py>(py: Python<'py>, tr: &Trajectory) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", &tr.times)?;
    d.set_item("s", tr.states.iter().map(|x| x.s).collect::<Vec<_>>())?;
    d.set_item("u", tr.states.iter().map(|x| x.u).collect::<Vec<_>>())?;
    d.set_item("e", tr.states.iter().map(|x| x.e.clone()).collect::<Vec<_>>())?;
    d.set_item("t_star", tr.t_star)?;
    d.set_item("reached", tr.reached)?;
    Ok(d)
}

/// Limiting fraction `T*` of the greedy independent set on a d-regular graph.
#[pyfunction]
fn jamming_constant(d: usize) -> f64 {
    deviations::jamming_constant(d)
}

/// Fluid limit for degree probabilities `probs`.
#[pyfunction]
#[pyo3(signature = (probs, step = odeflow::DEFAULT_STEP))]
fn fluid_limit<'py>(py: Python<'py>, probs: Vec<f64>, step: f64) -> PyResult<Bound<'py, PyDict>> {
    let dist = DegreeDistribution::new(probs).map_err(to_py)?;
    let tr = py.detach(|| odeflow::fluid_limit(&dist, step)).map_err(to_py)?;
    trajectory_dict(py, &tr)
}

/// Reduced Hamilton path of a d-regular graph from adjoint tilt `alpha0`.
#[pyfunction]
#[pyo3(signature = (d, alpha0, step = odeflow::DEFAULT_STEP))]
fn hamilton_path_regular<'py>(py: Python<'py>, d: usize, alpha0: f64, step: f64) -> PyResult<Bound<'py, PyDict>> {
    let sol = py.detach(|| odeflow::hamilton_path_regular(d, alpha0, step)).map_err(to_py)?;
    let out = trajectory_dict(py, &sol.trajectory)?;
    out.set_item("action", sol.action)?;
    out.set_item("t_alpha0", sol.t_alpha0)?;
    Ok(out)
}

/// `(alpha0, T_alpha0, F)` lists; NaN marks points whose path blew up.
#[pyfunction]
#[pyo3(signature = (d, lo, hi, points, step = odeflow::DEFAULT_STEP))]
fn rate_curve_regular(
    py: Python<'_>,
    d: usize,
    lo: f64,
    hi: f64,
    points: usize,
    step: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let curve = py.detach(|| deviations::rate_curve_regular_with(d, (lo, hi), points, step)).map_err(to_py)?;
    Ok((curve.alpha0_grid, curve.t_values, curve.f_values))
}

/// Rate of `T_N*/N >= T* + eps` (upper) or `<= T* - eps` (lower); returns `(alpha0, rate)`.
#[pyfunction]
#[pyo3(signature = (d, eps, side_name = "upper", step = odeflow::DEFAULT_STEP))]
fn deviation_rate(py: Python<'_>, d: usize, eps: f64, side_name: &str, step: f64) -> PyResult<(f64, f64)> {
    let side = side(side_name)?;
    let r = py.detach(|| deviations::deviation_rate_with(d, eps, side, step)).map_err(to_py)?;
    Ok((r.alpha0, r.rate))
}

/// `H(x, alpha)` with both given flat as `(s, u, e_0, .., e_D)`.
#[pyfunction]
fn hamiltonian_value(x: Vec<f64>, alpha: Vec<f64>) -> PyResult<f64> {
    hamiltonian::hamiltonian(&MacroState::from_flat(&x), &Covector::from_flat(&alpha)).map_err(to_py)
}

/// `∇_α H(x, alpha)`, flat.
#[pyfunction]
fn grad_alpha(x: Vec<f64>, alpha: Vec<f64>) -> PyResult<Vec<f64>> {
    hamiltonian::grad_alpha(&MacroState::from_flat(&x), &Covector::from_flat(&alpha))
        .map(|v| v.flat())
        .map_err(to_py)
}

/// Closed-form d-regular cost `L((s, u, e), beta)`; `inf` off the domain.
#[pyfunction]
fn cost_regular(d: usize, x: [f64; 3], beta: [f64; 3]) -> PyResult<f64> {
    legendre::cost_regular(d, x, beta).map(|c| c.value).map_err(to_py)
}

/// `T_N*` of one exact run on the given degree sequence.
#[pyfunction]
#[pyo3(signature = (degrees, seed = 0))]
fn simulate(degrees: Vec<usize>, seed: u64) -> PyResult<usize> {
    let cap = degrees.iter().copied().max().unwrap_or(0).max(greedy_ldp::model::DEFAULT_DEGREE_CAP);
    let seq = DegreeSequence::new(degrees, cap).map_err(to_py)?;
    Ok(dynamics::run_to_absorption(&seq, RunSeed::new(seed, 0), 0).t_star_steps)
}

/// `T_N*` for `replicas` independent d-regular graphs on `n` vertices.
#[pyfunction]
fn sample_regular(py: Python<'_>, d: usize, n: usize, replicas: usize, seed: u64) -> PyResult<Vec<usize>> {
    let seq = DegreeSequence::regular(d, n).map_err(to_py)?;
    Ok(py.detach(|| montecarlo::sample_absorption_times(&seq, replicas, seed)))
}

/// Exact law of `T_N*` as `(k, numerator, denominator)` rows for tiny sequences.
#[pyfunction]
fn exact_law(degrees: Vec<usize>) -> PyResult<Vec<(usize, String, String)>> {
    let cap = degrees.iter().copied().max().unwrap_or(0).max(greedy_ldp::model::DEFAULT_DEGREE_CAP);
    let seq = DegreeSequence::new(degrees, cap).map_err(to_py)?;
    let law = oracle::exact_distribution_tiny(&seq).map_err(to_py)?;
    Ok(law.into_iter().map(|(k, p)| (k, p.numer().to_string(), p.denom().to_string())).collect())
}

#[pymodule]
fn greedy_ldp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", greedy_ldp::io::VERSION)?;
    m.add_function(wrap_pyfunction!(jamming_constant, m)?)?;
    m.add_function(wrap_pyfunction!(fluid_limit, m)?)?;
    m.add_function(wrap_pyfunction!(hamilton_path_regular, m)?)?;
    m.add_function(wrap_pyfunction!(rate_curve_regular, m)?)?;
    m.add_function(wrap_pyfunction!(deviation_rate, m)?)?;
    m.add_function(wrap_pyfunction!(hamiltonian_value, m)?)?;
    m.add_function(wrap_pyfunction!(grad_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(cost_regular, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sample_regular, m)?)?;
    m.add_function(wrap_pyfunction!(exact_law, m)?)?;
    Ok(())
}
