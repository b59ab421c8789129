//! Python bindings for `kgsq`.
//!
//! Phase points cross the boundary as opaque `PhasePoint` objects; coefficients
//! come out as lists of Python complex numbers in grid order (see
//! `Grid.wavevectors`).

use kgsq::flow::{self, FlowKind, IntegratorConfig, TangentPair};
use kgsq::norms::{self, SpaceTimeSamples};
use kgsq::random::{self, BasePair, RandomSeed};
use kgsq::spectral::snapshot::{load_phase_point, save_phase_point};
use kgsq::spectral::{self, CoefficientConvention, FourierField, SpectralGrid, Wavevector};
use kgsq::symplectic::{self, BallSpec, CylinderSpec, EnergyKind, WitnessOptions};
use kgsq::Error;
use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::path::PathBuf;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        e @ (Error::BlowUp { .. } | Error::NonFinite { .. } | Error::PicardNotConverged { .. }) => {
            PyRuntimeError::new_err(e.to_string())
        }
        e => PyValueError::new_err(e.to_string()),
    }
}

fn flow_kind(name: &str, cutoff: Option<f64>) -> PyResult<FlowKind> {
    match (name, cutoff) {
        ("free", _) => Ok(FlowKind::Free),
        ("full", _) => Ok(FlowKind::Full),
        ("truncated", Some(n)) => Ok(FlowKind::Truncated(n)),
        ("truncated", None) => Err(PyValueError::new_err("flow 'truncated' needs a cutoff")),
        _ => Err(PyValueError::new_err(format!(
            "unknown flow {name:?} (expected free, full or truncated)"
        ))),
    }
}

fn integrator(dt: f64) -> IntegratorConfig {
    IntegratorConfig::with_dt(dt)
}

/// Resolved Fourier box `[-kmax, kmax]³` and its physical resolution.
#[pyclass(name = "Grid", frozen, eq, hash, from_py_object)]
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct PyGrid(SpectralGrid);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (kmax, n_phys=None))]
    fn new(kmax: usize, n_phys: Option<usize>) -> PyResult<Self> {
        let g = match n_phys {
            Some(n) => SpectralGrid::with_resolution(kmax, n),
            None => SpectralGrid::new(kmax),
        };
        g.map(Self).map_err(to_py)
    }

    #[getter]
    fn kmax(&self) -> usize {
        self.0.kmax()
    }

    #[getter]
    fn n_phys(&self) -> usize {
        self.0.n_phys()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Wavevectors in coefficient order.
    fn wavevectors(&self) -> Vec<Wavevector> {
        self.0.wavevectors().map(|(_, k)| k).collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid(kmax={}, n_phys={})", self.0.kmax(), self.0.n_phys())
    }
}

/// Initial data `(u, u_t)` as Hermitian Fourier coefficients.
#[pyclass(name = "PhasePoint", from_py_object)]
#[derive(Clone)]
struct PyPhasePoint(spectral::PhasePoint);

#[pymethods]
impl PyPhasePoint {
    /// Builds a point from coefficient lists; the result is symmetrized.
    #[new]
    fn new(grid: PyGrid, pos: Vec<Complex64>, vel: Vec<Complex64>) -> PyResult<Self> {
        let conv = CoefficientConvention::Complex;
        let pos = FourierField::from_coeffs(grid.0, pos, conv).map_err(to_py)?;
        let vel = FourierField::from_coeffs(grid.0, vel, conv).map_err(to_py)?;
        spectral::PhasePoint::new(pos, vel).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn zeros(grid: PyGrid) -> Self {
        Self(spectral::PhasePoint::zeros(grid.0))
    }

    /// The point with `pos` (and `vel`) concentrated on the pair `±k`.
    #[staticmethod]
    #[pyo3(signature = (grid, k, pos, vel=Complex64::new(0.0, 0.0)))]
    fn single_mode(grid: PyGrid, k: Wavevector, pos: Complex64, vel: Complex64) -> PyResult<Self> {
        let p = FourierField::single_mode(grid.0, k, pos).map_err(to_py)?;
        let v = FourierField::single_mode(grid.0, k, vel).map_err(to_py)?;
        spectral::PhasePoint::new(p, v).map(Self).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (path, n_phys=None))]
    fn load(path: PathBuf, n_phys: Option<usize>) -> PyResult<Self> {
        load_phase_point(&path, n_phys).map(Self).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_phase_point(&path, &self.0).map_err(to_py)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid())
    }

    #[getter]
    fn pos(&self) -> Vec<Complex64> {
        self.0.pos.coeffs().to_vec()
    }

    #[getter]
    fn vel(&self) -> Vec<Complex64> {
        self.0.vel.coeffs().to_vec()
    }

    /// `(û(k), û_t(k))`.
    fn coeff(&self, k: Wavevector) -> PyResult<(Complex64, Complex64)> {
        if !self.0.grid().contains(k) {
            return Err(PyValueError::new_err(format!("mode {k:?} outside the grid")));
        }
        Ok((self.0.pos.coeff(k), self.0.vel.coeff(k)))
    }

    /// `‖u‖_{H^s} + ‖u_t‖_{H^{s-1}}` in its Hilbert form.
    #[pyo3(signature = (s=0.5))]
    fn pair_norm(&self, s: f64) -> f64 {
        self.0.pair_norm(s)
    }

    fn is_hermitian(&self) -> bool {
        self.0.is_hermitian()
    }

    /// Position field sampled on the `n³` physical grid, flattened in C order.
    #[pyo3(signature = (n=None))]
    fn physical(&self, n: Option<usize>) -> PyResult<Vec<f64>> {
        let n = n.unwrap_or(self.0.grid().n_phys());
        let f = spectral::to_physical(&self.0.pos, n).map_err(to_py)?;
        Ok(f.data().to_vec())
    }

    /// Applies the smooth (`"smooth"`) or sharp (`"sharp"`) projector.
    #[pyo3(signature = (cutoff, mode="smooth"))]
    fn project(&self, cutoff: f64, mode: &str) -> PyResult<Self> {
        let mode = match mode {
            "smooth" => spectral::ProjectionMode::Smooth,
            "sharp" => spectral::ProjectionMode::Sharp,
            _ => return Err(PyValueError::new_err(format!("unknown projector {mode:?}"))),
        };
        spectral::project(&self.0, mode, cutoff).map(Self).map_err(to_py)
    }

    fn __add__(&self, other: &Self) -> PyResult<Self> {
        self.check(other)?;
        Ok(Self(self.0.add(&other.0)))
    }

    fn __sub__(&self, other: &Self) -> PyResult<Self> {
        self.check(other)?;
        Ok(Self(self.0.sub(&other.0)))
    }

    fn __mul__(&self, c: f64) -> Self {
        Self(self.0.scale(c))
    }

    fn __rmul__(&self, c: f64) -> Self {
        Self(self.0.scale(c))
    }

    fn __repr__(&self) -> String {
        format!(
            "PhasePoint(kmax={}, pair_norm_half={:.6e})",
            self.0.grid().kmax(),
            self.0.pair_norm(0.5)
        )
    }
}

impl PyPhasePoint {
    fn check(&self, other: &Self) -> PyResult<()> {
        if self.0.grid() != other.0.grid() {
            return Err(PyValueError::new_err("phase points live on different grids"));
        }
        Ok(())
    }
}

/// Randomized power-law data `(g_k ⟨k⟩^{-α}, h_k ⟨k⟩^{1-α}) · A`.
#[pyfunction]
#[pyo3(signature = (grid, seed, amplitude=0.5, decay=1.5))]
fn randomize(grid: PyGrid, seed: u64, amplitude: f64, decay: f64) -> PyPhasePoint {
    PyPhasePoint(random::randomize(
        &BasePair::power_law(grid.0, amplitude, decay),
        RandomSeed(seed),
    ))
}

/// Randomizes an arbitrary base pair with the seeded Gaussian multipliers.
#[pyfunction]
fn randomize_base(base: &PyPhasePoint, seed: u64) -> PyPhasePoint {
    PyPhasePoint(random::randomize(
        &BasePair::from_point(&base.0),
        RandomSeed(seed),
    ))
}

/// Evolves `point` and returns `(times, points)` at the requested sample times
/// (only the final state when `times` is omitted).
#[pyfunction]
#[pyo3(signature = (point, horizon, dt=2e-3, flow="full", cutoff=None, times=None))]
fn evolve(
    py: Python<'_>,
    point: &PyPhasePoint,
    horizon: f64,
    dt: f64,
    flow: &str,
    cutoff: Option<f64>,
    times: Option<Vec<f64>>,
) -> PyResult<(Vec<f64>, Vec<PyPhasePoint>)> {
    let kind = flow_kind(flow, cutoff)?;
    let times = times.unwrap_or_default();
    let p = point.0.clone();
    let traj = py
        .detach(move || flow::evolve(&p, horizon, &integrator(dt), kind, &times))
        .map_err(to_py)?;
    Ok((traj.times, traj.points.into_iter().map(PyPhasePoint).collect()))
}

/// The exact linear flow `S(t)`.
#[pyfunction]
fn free_evolve(point: &PyPhasePoint, t: f64) -> PyPhasePoint {
    PyPhasePoint(flow::free_evolve(&point.0, t))
}

/// Evolves a base point and two tangent vectors; returns `(base, a, b)` at the horizon.
#[pyfunction]
#[pyo3(signature = (base, a, b, horizon, dt=2e-3, flow="full", cutoff=None))]
#[allow(clippy::too_many_arguments)]
fn tangent_evolve(
    py: Python<'_>,
    base: &PyPhasePoint,
    a: &PyPhasePoint,
    b: &PyPhasePoint,
    horizon: f64,
    dt: f64,
    flow: &str,
    cutoff: Option<f64>,
) -> PyResult<(PyPhasePoint, PyPhasePoint, PyPhasePoint)> {
    let kind = flow_kind(flow, cutoff)?;
    let tp = TangentPair::new(base.0.clone(), a.0.clone(), b.0.clone()).map_err(to_py)?;
    let out = py
        .detach(move || flow::tangent_evolve(&tp, horizon, &integrator(dt), kind))
        .map_err(to_py)?;
    Ok((
        PyPhasePoint(out.base),
        PyPhasePoint(out.delta_a),
        PyPhasePoint(out.delta_b),
    ))
}

/// Conserved energy. `kind` is `full`, `free`, `inhomogeneous` or `truncated`
/// (the last needs `n` and `k >= 2n`).
#[pyfunction]
#[pyo3(signature = (point, kind="full", n=None, k=None))]
fn energy(point: &PyPhasePoint, kind: &str, n: Option<f64>, k: Option<f64>) -> PyResult<f64> {
    let kind = match (kind, n) {
        ("full", _) => EnergyKind::Full,
        ("free", _) => EnergyKind::Free,
        ("inhomogeneous", _) => EnergyKind::Inhomogeneous,
        ("truncated", Some(n)) => EnergyKind::TruncatedPair {
            n,
            k: k.unwrap_or(2.0 * n),
        },
        ("truncated", None) => return Err(PyValueError::new_err("truncated energy needs n")),
        _ => return Err(PyValueError::new_err(format!("unknown energy {kind:?}"))),
    };
    symplectic::energy(&point.0, kind).map_err(to_py)
}

/// Symplectic form `ω(a, b)`.
#[pyfunction]
fn omega(a: &PyPhasePoint, b: &PyPhasePoint) -> PyResult<f64> {
    symplectic::omega(&a.0, &b.0).map_err(to_py)
}

/// Space-time `L^q_t L^r_x` norm of the position fields of `points`.
#[pyfunction]
fn strichartz_norm(times: Vec<f64>, points: Vec<PyPhasePoint>, q: f64, r: f64) -> PyResult<f64> {
    let fields = points.into_iter().map(|p| p.0.pos).collect();
    let s = SpaceTimeSamples::new(times, fields, None).map_err(to_py)?;
    norms::strichartz_norm(&s, q, r).map_err(to_py)
}

/// `V^p` norm of a sampled path of vectors.
#[pyfunction]
#[pyo3(signature = (path, p=2.0, zero_at_infinity=false))]
fn vp_norm(path: Vec<Vec<f64>>, p: f64, zero_at_infinity: bool) -> PyResult<f64> {
    norms::vp_norm(&path, p, zero_at_infinity).map_err(to_py)
}

/// Empirical tail `P(X > λ)` and the `exp(-c λ^θ)` fit as a dict.
#[pyfunction]
fn tail_statistics<'py>(
    py: Python<'py>,
    values: Vec<f64>,
    lambdas: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = random::tail_statistics(&values, &lambdas).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("lambda", r.lambda_grid)?;
    d.set_item("tail", r.empirical_tail)?;
    if let Some(f) = r.fit {
        d.set_item("c", f.c)?;
        d.set_item("theta", f.theta)?;
        d.set_item("residual", f.residual)?;
    }
    Ok(d)
}

/// Gradient search for a point of the ball whose image leaves the cylinder.
#[pyfunction]
#[pyo3(signature = (
    center, radius, k0, r, horizon,
    z0=Complex64::new(0.0, 0.0), z1=Complex64::new(0.0, 0.0),
    dt=0.01, flow="truncated", cutoff=Some(4.0),
    step=0.5, max_iters=200, tol=1e-6,
))]
#[allow(clippy::too_many_arguments)]
fn witness_search<'py>(
    py: Python<'py>,
    center: &PyPhasePoint,
    radius: f64,
    k0: Wavevector,
    r: f64,
    horizon: f64,
    z0: Complex64,
    z1: Complex64,
    dt: f64,
    flow: &str,
    cutoff: Option<f64>,
    step: f64,
    max_iters: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let kind = flow_kind(flow, cutoff)?;
    let ball = BallSpec::new(center.0.clone(), radius).map_err(to_py)?;
    let cyl = CylinderSpec::new(k0, z0, z1, r).map_err(to_py)?;
    let opt = WitnessOptions { step, max_iters, tol };
    let res = py
        .detach(move || symplectic::witness_search(&ball, &cyl, horizon, kind, &integrator(dt), &opt))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("witness", PyPhasePoint(res.witness))?;
    d.set_item("functional_value", res.functional_value)?;
    d.set_item("iterations", res.iterations)?;
    d.set_item("converged", res.converged)?;
    d.set_item("escaped", res.escaped)?;
    let trace: Vec<(usize, f64, f64, f64)> = res
        .trace
        .iter()
        .map(|t| (t.iter, t.g, t.grad_norm, t.step))
        .collect();
    d.set_item("trace", trace)?;
    Ok(d)
}

/// Runs the `kgsq` command line with `args` (without the program name) and
/// returns its exit status.
#[pyfunction]
fn cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("kgsq".to_string()).chain(args).collect();
    py.detach(move || kgsq::harness::cli::cli_main(argv))
}

#[pymodule]
fn kgsq_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyPhasePoint>()?;
    m.add_function(wrap_pyfunction!(randomize, m)?)?;
    m.add_function(wrap_pyfunction!(randomize_base, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(free_evolve, m)?)?;
    m.add_function(wrap_pyfunction!(tangent_evolve, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(omega, m)?)?;
    m.add_function(wrap_pyfunction!(strichartz_norm, m)?)?;
    m.add_function(wrap_pyfunction!(vp_norm, m)?)?;
    m.add_function(wrap_pyfunction!(tail_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(witness_search, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    Ok(())
}
