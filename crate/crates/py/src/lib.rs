//! Python bindings for the pseudo-Markovian PDE laboratory: paths, hitting
//! times, the sublinear-expectation estimator, cone solves and the three
//! experiment pipelines (cascade / control / game), all seeded and
//! deterministic.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ppde::hitting::{self, ConeSpec};
use ppde::nonlin::{Hjb1dGrid, MeasureFamilySpec};
use ppde::path::{self, SampledPath};

fn err(e: ppde::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A piecewise-linear sample path.
#[pyclass(name = "Path")]
#[derive(Clone)]
struct PyPath {
    inner: SampledPath,
}

#[pymethods]
impl PyPath {
    #[new]
    fn new(t_start: f64, t_end: f64, knots: Vec<(f64, Vec<f64>)>) -> PyResult<Self> {
        Ok(Self { inner: SampledPath::new(t_start, t_end, knots).map_err(err)? })
    }

    #[staticmethod]
    fn zero(dim: usize, t_start: f64, t_end: f64) -> Self {
        Self { inner: SampledPath::zero(dim, t_start, t_end) }
    }

    fn eval(&self, t: f64) -> PyResult<Vec<f64>> {
        self.inner.eval(t).map_err(err)
    }

    fn sup_norm(&self, t: f64) -> PyResult<f64> {
        self.inner.sup_norm(t).map_err(err)
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn t_start(&self) -> f64 {
        self.inner.t_start()
    }

    fn t_end(&self) -> f64 {
        self.inner.t_end()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Self { inner: SampledPath::from_csv(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: SampledPath::from_json(text).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Path(dim={}, knots={}, [{}, {}])",
            self.inner.dim(),
            self.inner.n_knots(),
            self.inner.t_start(),
            self.inner.t_end()
        )
    }
}

/// `d_inf` between two observed paths.
#[pyfunction]
fn d_infinity(t_a: f64, a: &PyPath, t_b: f64, b: &PyPath) -> PyResult<f64> {
    let pa = path::PathPoint::new(t_a, a.inner.clone()).map_err(err)?;
    let pb = path::PathPoint::new(t_b, b.inner.clone()).map_err(err)?;
    path::d_infinity(&pa, &pb).map_err(err)
}

/// Concatenation `prefix (x)_t suffix`.
#[pyfunction]
fn concatenate(prefix: &PyPath, t: f64, suffix: &PyPath) -> PyResult<PyPath> {
    Ok(PyPath { inner: path::concatenate(&prefix.inner, t, &suffix.inner).map_err(err)? })
}

/// First exit of the shrinking ball: returns `(time, kind, location)`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn hitting_time(
    path: &PyPath,
    t: f64,
    x: Vec<f64>,
    t0: f64,
    radius: f64,
    slope: f64,
    horizon: f64,
) -> PyResult<(f64, String, Vec<f64>)> {
    let spec = ConeSpec::new(t0, radius, slope, horizon).map_err(err)?;
    let hit = hitting::hitting_time(&path.inner, t, &x, &spec).map_err(err)?;
    let kind = match hit.kind {
        hitting::HitKind::Lateral => "lateral",
        hitting::HitKind::Terminal => "terminal",
    };
    Ok((hit.time, kind.into(), hit.location))
}

/// Recursive hitting sequence: `(points, terminal_time)` with one
/// `(time, increment)` pair per lateral exit.
#[pyfunction]
fn hitting_sequence(path: &PyPath, epsilon: f64, slope: f64) -> PyResult<(Vec<(f64, Vec<f64>)>, f64)> {
    let pi = hitting::hitting_sequence(&path.inner, epsilon, slope).map_err(err)?;
    Ok((pi.points.iter().map(|p| (p.time, p.increment.clone())).collect(), pi.terminal_time))
}

/// Linear interpolation of a partition as a path.
#[pyfunction]
fn interpolate_partition(
    points: Vec<(f64, Vec<f64>)>,
    epsilon: f64,
    slope: f64,
    t0: f64,
    horizon: f64,
) -> PyResult<PyPath> {
    let pi = hitting::Partition {
        epsilon,
        slope,
        points: points
            .into_iter()
            .map(|(time, increment)| hitting::PartitionPoint { time, increment })
            .collect(),
        terminal_time: horizon,
    };
    Ok(PyPath { inner: hitting::interpolate_partition(&pi, t0, horizon).map_err(err)? })
}

/// Cone classification of a space-time point.
#[pyfunction]
fn cone_classify(t0: f64, radius: f64, slope: f64, horizon: f64, s: f64, x: Vec<f64>) -> PyResult<String> {
    let spec = ConeSpec::new(t0, radius, slope, horizon).map_err(err)?;
    Ok(match hitting::cone_classify(&spec, s, &x) {
        hitting::ConeRegion::Interior => "interior",
        hitting::ConeRegion::LateralBoundary => "lateral",
        hitting::ConeRegion::TerminalBoundary => "terminal",
        hitting::ConeRegion::Outside => "outside",
    }
    .into())
}

/// Exact-arithmetic restart identity check.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn markov_restart_check(
    path: &PyPath,
    t: f64,
    x: Vec<f64>,
    t0: f64,
    radius: f64,
    slope: f64,
    horizon: f64,
    tau: f64,
) -> PyResult<bool> {
    let spec = ConeSpec::new(t0, radius, slope, horizon).map_err(err)?;
    hitting::markov_restart_check(&path.inner, t, &x, &spec, tau).map_err(err)
}

/// Sublinear-expectation estimate of a named functional; returns JSON.
#[pyfunction]
fn upper_expectation(
    functional: &str,
    l: f64,
    horizon: f64,
    dim: usize,
    samples: usize,
    seed: u64,
    feedback: bool,
) -> PyResult<String> {
    ppde::cli::run_nonlin_exp(functional, l, horizon, dim, samples, seed, feedback).map_err(err)
}

/// One-dimensional HJB oracle with a Python terminal callable.
#[pyfunction]
fn hjb_oracle_1d(
    py: Python<'_>,
    terminal: PyObject,
    l: f64,
    horizon: f64,
    x_max: f64,
    nx: usize,
    nt: usize,
) -> PyResult<f64> {
    let grid = Hjb1dGrid { x_max, nx, nt };
    let term = |x: f64| -> f64 {
        terminal
            .call1(py, (x,))
            .and_then(|v| v.extract::<f64>(py))
            .unwrap_or(f64::NAN)
    };
    ppde::nonlin::hjb_oracle_1d(term, l, horizon, &grid).map_err(err)
}

/// One Euler trajectory of the Wiener law (for smoke-testing pipelines).
#[pyfunction]
fn wiener_path(l: f64, dim: usize, horizon: f64, step: f64, seed: u64, index: u64) -> PyResult<PyPath> {
    let spec = MeasureFamilySpec::new(l, dim, 0.0, horizon, step).map_err(err)?;
    let law = ppde::nonlin::wiener_law(&spec).map_err(err)?;
    Ok(PyPath { inner: ppde::nonlin::simulate_one(&law, &spec, seed, index) })
}

/// Cone-domain finite-difference solve; returns JSON with the apex value.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn solve_cone(
    generator: &str,
    epsilon: f64,
    l1: f64,
    dx: f64,
    dt: f64,
    l: f64,
    c0: f64,
    horizon: f64,
    boundary: &str,
    boundary_value: f64,
) -> PyResult<String> {
    ppde::cli::run_solve_cone(generator, epsilon, l1, dx, dt, l, c0, horizon, boundary, boundary_value, false, None)
        .map(|(json, _)| json)
        .map_err(err)
}

/// Cascade pipeline on a TOML problem description; returns JSON.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn cascade(
    problem_toml: &str,
    epsilon: f64,
    levels: usize,
    samples: usize,
    seed: u64,
    family: &str,
    zero_discount: bool,
) -> PyResult<String> {
    ppde::cli::run_cascade(problem_toml, epsilon, levels, None, None, samples, seed, family, zero_discount)
        .map_err(err)
}

/// Stochastic control pipeline (direct vs frozen); returns JSON.
#[pyfunction]
fn shjb(problem_toml: &str, t: f64, x: f64, epsilon: f64, samples: usize, seed: u64) -> PyResult<String> {
    ppde::cli::run_shjb(problem_toml, t, x, epsilon, samples, seed).map_err(err)
}

/// Zero-sum game pipeline; returns JSON.
#[pyfunction]
fn isaacs(game_toml: &str, depth: usize, epsilon: f64, samples: usize, seed: u64) -> PyResult<String> {
    ppde::cli::run_isaacs(game_toml, depth, epsilon, samples, seed).map_err(err)
}

/// Bundled verification suite; returns a list of `(name, pass, detail)`.
#[pyfunction]
fn verify(suite: &str, seed: u64) -> PyResult<Vec<(String, bool, String)>> {
    let checks = ppde::cli::run_verify(suite, seed).map_err(err)?;
    Ok(checks.into_iter().map(|c| (c.name, c.pass, c.detail)).collect())
}

#[pymodule]
fn ppde_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPath>()?;
    m.add_function(wrap_pyfunction!(d_infinity, m)?)?;
    m.add_function(wrap_pyfunction!(concatenate, m)?)?;
    m.add_function(wrap_pyfunction!(hitting_time, m)?)?;
    m.add_function(wrap_pyfunction!(hitting_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(interpolate_partition, m)?)?;
    m.add_function(wrap_pyfunction!(cone_classify, m)?)?;
    m.add_function(wrap_pyfunction!(markov_restart_check, m)?)?;
    m.add_function(wrap_pyfunction!(upper_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(hjb_oracle_1d, m)?)?;
    m.add_function(wrap_pyfunction!(wiener_path, m)?)?;
    m.add_function(wrap_pyfunction!(solve_cone, m)?)?;
    m.add_function(wrap_pyfunction!(cascade, m)?)?;
    m.add_function(wrap_pyfunction!(shjb, m)?)?;
    m.add_function(wrap_pyfunction!(isaacs, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
