//! Free propagator, full and truncated nonlinear flows, and their tangent flows.
//!
//! The default integrator is Strang splitting of the Hamiltonian into the
//! linear Klein-Gordon part (propagated exactly per Fourier mode) and the
//! quartic potential (whose flow is the exact kick `u₁ ← u₁ - dt·F(u₀)`).
//! Both sub-flows are exact Hamiltonian flows, so the composition is
//! symplectic up to roundoff.

use crate::error::{Error, Result};
use crate::spectral::fft::{to_physical_pair, to_spectral_pair};
use crate::spectral::{
    bracket, cubic_power, multiply_physical, smooth_multiplier, to_physical, to_spectral, FourierField,
    PhasePoint, PhysicalField, SpectralGrid,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "n", rename_all = "lowercase")]
pub enum FlowKind {
    /// Linear Klein-Gordon flow `S(t)`.
    Free,
    /// Nonlinearity `u³`.
    Full,
    /// Nonlinearity `P_N((P_N u)³)` with the smooth projector `P_N`.
    Truncated(f64),
}

impl FlowKind {
    pub fn validate(&self) -> Result<()> {
        if let FlowKind::Truncated(n) = self {
            if !(*n > 0.0) || !n.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "truncation parameter must be positive, got {n}"
                )));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            FlowKind::Free => "free".into(),
            FlowKind::Full => "full".into(),
            FlowKind::Truncated(n) => format!("truncated({n})"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Strang,
    ExpDuhamel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Cap on the running `L⁴_{t,x}` norm.
    pub blowup_threshold: f64,
    pub picard_iters: usize,
    pub picard_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 2e-3,
            scheme: Scheme::Strang,
            blowup_threshold: 1e3,
            picard_iters: 4,
            picard_tol: 1e-8,
        }
    }
}

impl IntegratorConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.picard_iters == 0 {
            return Err(Error::InvalidArgument("picard_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Time-stamped phase points produced by one flow.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    pub kind: FlowKind,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &PhasePoint {
        self.points.last().expect("trajectories are nonempty")
    }

    /// Physical samples of the position field at every recorded time.
    pub fn physical_samples(&self, n: usize) -> Result<Vec<PhysicalField>> {
        self.points.iter().map(|p| to_physical(&p.pos, n)).collect()
    }
}

/// A base point with two tangent vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentPair {
    pub base: PhasePoint,
    pub delta_a: PhasePoint,
    pub delta_b: PhasePoint,
}

impl TangentPair {
    pub fn new(base: PhasePoint, delta_a: PhasePoint, delta_b: PhasePoint) -> Result<Self> {
        if base.grid() != delta_a.grid() || base.grid() != delta_b.grid() {
            return Err(Error::GridMismatch("tangent pair must share a grid".into()));
        }
        Ok(Self {
            base,
            delta_a,
            delta_b,
        })
    }
}

fn frequencies(grid: SpectralGrid) -> Vec<f64> {
    grid.wavevectors().map(|(_, k)| bracket(k)).collect()
}

/// Exact linear Klein-Gordon propagator `S(t)`.
pub fn free_evolve(p: &PhasePoint, t: f64) -> PhasePoint {
    if t == 0.0 {
        return p.clone();
    }
    let grid = p.grid();
    let omega = frequencies(grid);
    let mut pos = Vec::with_capacity(grid.len());
    let mut vel = Vec::with_capacity(grid.len());
    for ((&a, &b), &w) in p.pos.coeffs().iter().zip(p.vel.coeffs()).zip(&omega) {
        let (s, c) = (t * w).sin_cos();
        pos.push(a * c + b * (s / w));
        vel.push(a * (-w * s) + b * c);
    }
    PhasePoint {
        pos: FourierField::from_raw(grid, pos),
        vel: FourierField::from_raw(grid, vel),
    }
}

/// Largest box needed to hold `P_N u`, whose support is `|k| < 2N`.
fn truncated_grid(grid: SpectralGrid, n: f64) -> Result<SpectralGrid> {
    let reach = ((2.0 * n).ceil() as usize).saturating_sub(1).max(1);
    if reach >= grid.kmax() {
        Ok(grid)
    } else {
        SpectralGrid::new(reach)
    }
}

/// Nonlinear force `F(u₀)` and `∫ v⁴` for the field `v` entering the nonlinearity.
pub(crate) fn nonlinear_force(pos: &FourierField, kind: FlowKind) -> Result<(FourierField, f64)> {
    match kind {
        FlowKind::Free => Ok((FourierField::zeros(pos.grid()), 0.0)),
        FlowKind::Full => Ok(crate::spectral::fft::cubic_power_with_quartic(pos)),
        FlowKind::Truncated(n) => {
            kind.validate()?;
            let grid = pos.grid();
            let work = truncated_grid(grid, n)?;
            let proj = smooth_multiplier(n);
            let v = pos.apply_multiplier(&proj).resample(work);
            let (cube, quartic) = crate::spectral::fft::cubic_power_with_quartic(&v);
            Ok((cube.apply_multiplier(&proj).resample(grid), quartic))
        }
    }
}

/// `F(u)` for the given kind: `u³` or `P_N((P_N u)³)`.
pub fn nonlinearity(pos: &FourierField, kind: FlowKind) -> Result<FourierField> {
    match kind {
        FlowKind::Full => Ok(cubic_power(pos)),
        _ => nonlinear_force(pos, kind).map(|(f, _)| f),
    }
}

/// Exact time-`dt` flow of the quartic potential: `u₁ ← u₁ - dt·F(u₀)`.
pub fn kick(p: &PhasePoint, dt: f64, kind: FlowKind) -> Result<PhasePoint> {
    require_nonlinear(kind)?;
    Ok(kick_with_quartic(p, dt, kind)?.0)
}

fn kick_with_quartic(p: &PhasePoint, dt: f64, kind: FlowKind) -> Result<(PhasePoint, f64)> {
    if dt == 0.0 {
        return Ok((p.clone(), 0.0));
    }
    let (force, quartic) = nonlinear_force(&p.pos, kind)?;
    Ok((
        PhasePoint {
            pos: p.pos.clone(),
            vel: p.vel.axpy(-dt, &force),
        },
        quartic,
    ))
}

fn require_nonlinear(kind: FlowKind) -> Result<()> {
    kind.validate()?;
    if kind == FlowKind::Free {
        return Err(Error::InvalidArgument(
            "this operation needs a nonlinear flow kind".into(),
        ));
    }
    Ok(())
}

/// `S(dt/2) ∘ kick(dt) ∘ S(dt/2)`.
pub fn strang_step(p: &PhasePoint, dt: f64, kind: FlowKind) -> Result<PhasePoint> {
    require_nonlinear(kind)?;
    Ok(strang_with_quartic(p, dt, kind)?.0)
}

fn strang_with_quartic(p: &PhasePoint, dt: f64, kind: FlowKind) -> Result<(PhasePoint, f64)> {
    let half = free_evolve(p, 0.5 * dt);
    let (kicked, quartic) = kick_with_quartic(&half, dt, kind)?;
    Ok((free_evolve(&kicked, 0.5 * dt), quartic))
}

/// `∫₀¹ e^{zx} dx` and `∫₀¹ x e^{zx} dx`.
fn phi_integrals(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 0.25 {
        let mut g1 = Complex64::new(0.0, 0.0);
        let mut g2 = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0); // z^n / n!
        for n in 0..20 {
            g1 += term / (n as f64 + 1.0);
            g2 += term / (n as f64 + 2.0);
            term = term * z / (n as f64 + 1.0);
        }
        (g1, g2)
    } else {
        let ez = z.exp();
        let g1 = (ez - 1.0) / z;
        let g2 = (ez * (z - 1.0) + 1.0) / (z * z);
        (g1, g2)
    }
}

const GL_OFFSET: f64 = 0.288_675_134_594_812_9; // √3 / 6

/// One step of the exponential Duhamel integrator on the half-wave variables
/// `u^± = ½(u₀ ∓ i⟨∇⟩^{-1} u₁)`.
///
/// The Duhamel integral is evaluated with the nonlinearity interpolated at the
/// two Gauss-Legendre nodes and the oscillatory kernel integrated exactly; node
/// values are found by Picard iteration.
pub fn duhamel_step(p: &PhasePoint, dt: f64, kind: FlowKind, picard_iters: usize) -> Result<PhasePoint> {
    let cfg = IntegratorConfig {
        dt,
        picard_iters,
        ..IntegratorConfig::default()
    };
    Ok(duhamel_with_quartic(p, dt, kind, &cfg)?.0)
}

fn duhamel_with_quartic(
    p: &PhasePoint,
    dt: f64,
    kind: FlowKind,
    cfg: &IntegratorConfig,
) -> Result<(PhasePoint, f64)> {
    require_nonlinear(kind)?;
    if cfg.picard_iters == 0 {
        return Err(Error::InvalidArgument("picard_iters must be at least 1".into()));
    }
    if dt == 0.0 {
        return Ok((p.clone(), 0.0));
    }
    let grid = p.grid();
    let omega = frequencies(grid);
    let i = Complex64::i();
    let plus0: Vec<Complex64> = p
        .pos
        .coeffs()
        .iter()
        .zip(p.vel.coeffs())
        .zip(&omega)
        .map(|((&a, &b), &w)| 0.5 * (a - i * b / w))
        .collect();
    let minus0: Vec<Complex64> = p
        .pos
        .coeffs()
        .iter()
        .zip(p.vel.coeffs())
        .zip(&omega)
        .map(|((&a, &b), &w)| 0.5 * (a + i * b / w))
        .collect();

    let s1 = dt * (0.5 - GL_OFFSET);
    let s2 = dt * (0.5 + GL_OFFSET);
    let h12 = s2 - s1;

    // Position field u(a) given the interpolated forcing.
    let advance = |a: f64, forces: Option<(&FourierField, &FourierField)>| -> PhasePoint {
        let mut pos = Vec::with_capacity(grid.len());
        let mut vel = Vec::with_capacity(grid.len());
        let (alpha1, beta1) = ((s2 - a) / h12, 1.0 / h12);
        let (alpha2, beta2) = ((a - s1) / h12, -1.0 / h12);
        for idx in 0..grid.len() {
            let w = omega[idx];
            let ep = Complex64::from_polar(1.0, w * a);
            let mut up = ep * plus0[idx];
            let mut um = ep.conj() * minus0[idx];
            if let Some((f1, f2)) = forces {
                let (f1, f2) = (f1.coeffs()[idx], f2.coeffs()[idx]);
                for sigma in [1.0, -1.0] {
                    let z = Complex64::new(0.0, sigma * w * a);
                    let (g1, g2) = phi_integrals(z);
                    let w1 = alpha1 * a * g1 + beta1 * a * a * g2;
                    let w2 = alpha2 * a * g1 + beta2 * a * a * g2;
                    let integral = f1 * w1 + f2 * w2;
                    if sigma > 0.0 {
                        up += i * integral / (2.0 * w);
                    } else {
                        um -= i * integral / (2.0 * w);
                    }
                }
            }
            pos.push(up + um);
            vel.push(i * w * (up - um));
        }
        let mut pos = FourierField::from_raw(grid, pos);
        let mut vel = FourierField::from_raw(grid, vel);
        pos.enforce_hermitian();
        vel.enforce_hermitian();
        PhasePoint { pos, vel }
    };

    let mut nodes = [advance(s1, None), advance(s2, None)];
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.picard_iters {
        let (f1, _) = nonlinear_force(&nodes[0].pos, kind)?;
        let (f2, _) = nonlinear_force(&nodes[1].pos, kind)?;
        let next = [advance(s1, Some((&f1, &f2))), advance(s2, Some((&f1, &f2)))];
        residual = next
            .iter()
            .zip(&nodes)
            .map(|(a, b)| {
                let scale = a.pos.l2_norm().max(a.vel.l2_norm()).max(f64::MIN_POSITIVE);
                a.sub(b).pos.l2_norm().max(a.sub(b).vel.l2_norm()) / scale
            })
            .fold(0.0, f64::max);
        nodes = next;
    }
    if residual > cfg.picard_tol {
        return Err(Error::PicardNotConverged {
            residual,
            iterations: cfg.picard_iters,
        });
    }
    let (f1, q1) = nonlinear_force(&nodes[0].pos, kind)?;
    let (f2, q2) = nonlinear_force(&nodes[1].pos, kind)?;
    Ok((advance(dt, Some((&f1, &f2))), 0.5 * (q1 + q2)))
}

fn step_with_quartic(
    p: &PhasePoint,
    h: f64,
    kind: FlowKind,
    cfg: &IntegratorConfig,
) -> Result<(PhasePoint, f64)> {
    match kind {
        FlowKind::Free => Ok((free_evolve(p, h), 0.0)),
        _ => match cfg.scheme {
            Scheme::Strang => strang_with_quartic(p, h, kind),
            Scheme::ExpDuhamel => duhamel_with_quartic(p, h, kind, cfg),
        },
    }
}

fn validate_samples(horizon: f64, sample_times: &[f64]) -> Result<()> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "horizon must be >= 0, got {horizon}"
        )));
    }
    let mut prev = f64::NEG_INFINITY;
    for &t in sample_times {
        if !(0.0..=horizon).contains(&t) || t <= prev {
            return Err(Error::InvalidArgument(format!(
                "sample times must be strictly increasing within [0, {horizon}]"
            )));
        }
        prev = t;
    }
    Ok(())
}

/// `n + 1` equispaced times on `[0, horizon]` (just `[0]` when the horizon is zero).
pub fn uniform_times(horizon: f64, n: usize) -> Vec<f64> {
    if horizon == 0.0 || n == 0 {
        return vec![0.0];
    }
    (0..=n).map(|i| horizon * i as f64 / n as f64).collect()
}

/// Step sizes landing exactly on `target` from `t`.
fn steps_to(t: f64, target: f64, dt: f64) -> impl Iterator<Item = f64> {
    let span = target - t;
    let full = if span > 0.0 {
        ((span / dt) * (1.0 - 1e-12)).floor() as usize
    } else {
        0
    };
    let rest = span - full as f64 * dt;
    std::iter::repeat_n(dt, full).chain((rest > 1e-14 * dt.max(1.0)).then_some(rest))
}

/// Running `L⁴_{t,x}` monitor used to detect blow-up.
struct Monitor {
    integral: f64,
    threshold: f64,
}

impl Monitor {
    fn push(&mut self, h: f64, quartic: f64, time: f64) -> Result<()> {
        self.integral += h.abs() * quartic;
        let norm = self.integral.powf(0.25);
        if norm > self.threshold {
            return Err(Error::BlowUp { time, norm });
        }
        Ok(())
    }
}

/// Integrates from `p` and records the state at each sample time.
pub fn evolve(
    p: &PhasePoint,
    horizon: f64,
    cfg: &IntegratorConfig,
    kind: FlowKind,
    sample_times: &[f64],
) -> Result<Trajectory> {
    cfg.validate()?;
    kind.validate()?;
    let default_samples = [horizon];
    let samples = if sample_times.is_empty() {
        &default_samples[..]
    } else {
        sample_times
    };
    validate_samples(horizon, samples)?;

    let mut monitor = Monitor {
        integral: 0.0,
        threshold: cfg.blowup_threshold,
    };
    let mut state = p.clone();
    let mut t = 0.0;
    let mut times = Vec::with_capacity(samples.len());
    let mut points = Vec::with_capacity(samples.len());
    for &target in samples {
        for h in steps_to(t, target, cfg.dt) {
            let (next, quartic) = step_with_quartic(&state, h, kind, cfg)?;
            t += h;
            if !next.is_finite() {
                return Err(Error::NonFinite { time: t });
            }
            monitor.push(h, quartic, t)?;
            state = next;
        }
        t = target;
        times.push(target);
        points.push(state.clone());
    }
    Ok(Trajectory { times, points, kind })
}

/// Linearization of the nonlinear force about a base position.
struct Linearization {
    kind: FlowKind,
    grid: SpectralGrid,
    work: SpectralGrid,
    /// `3 v²` on the work grid, with `v = u` or `v = P_N u`.
    weight: PhysicalField,
}

impl Linearization {
    fn apply(&self, deltas: &[&FourierField]) -> Result<Vec<FourierField>> {
        let project = |f: &FourierField| match self.kind {
            FlowKind::Truncated(n) => f.apply_multiplier(smooth_multiplier(n)),
            _ => f.clone(),
        };
        let n = self.weight.resolution();
        // Zero directions stay exactly zero instead of picking up pair-packing crosstalk.
        let live: Vec<usize> = (0..deltas.len()).filter(|&i| !deltas[i].is_zero()).collect();
        let packed: Vec<&FourierField> = live.iter().map(|&i| deltas[i]).collect();
        let mut out = vec![FourierField::zeros(self.grid); deltas.len()];
        let mut results = Vec::with_capacity(packed.len());
        for chunk in packed.chunks(2) {
            let a = project(chunk[0]).resample(self.work);
            if chunk.len() == 2 {
                let b = project(chunk[1]).resample(self.work);
                let (pa, pb) = to_physical_pair(&a, &b, n)?;
                let (fa, fb) = to_spectral_pair(&pa.mul(&self.weight), &pb.mul(&self.weight), self.work)?;
                results.push(project(&fa).resample(self.grid));
                results.push(project(&fb).resample(self.grid));
            } else {
                let fa = multiply_physical(&self.weight, &a)?;
                results.push(project(&fa).resample(self.grid));
            }
        }
        for (i, r) in live.into_iter().zip(results) {
            out[i] = r;
        }
        Ok(out)
    }
}

/// Force, `∫v⁴`, and the linearized force operator at `pos`.
fn force_and_linearization(pos: &FourierField, kind: FlowKind) -> Result<(FourierField, f64, Linearization)> {
    let grid = pos.grid();
    let (v, work) = match kind {
        FlowKind::Truncated(n) => {
            let work = truncated_grid(grid, n)?;
            (pos.apply_multiplier(smooth_multiplier(n)).resample(work), work)
        }
        _ => (pos.clone(), grid),
    };
    let phys = to_physical(&v, work.n_phys())?;
    let mut cube = phys.clone();
    let mut quartic = 0.0;
    for x in cube.data_mut() {
        let u = *x;
        quartic += u * u * u * u;
        *x = u * u * u;
    }
    quartic /= cube.data().len() as f64;
    let mut force = to_spectral(&cube, work)?;
    if let FlowKind::Truncated(n) = kind {
        force = force.apply_multiplier(smooth_multiplier(n));
    }
    let force = force.resample(grid);
    let weight = phys.map(|u| 3.0 * u * u);
    Ok((
        force,
        quartic,
        Linearization {
            kind,
            grid,
            work,
            weight,
        },
    ))
}

/// Strang step of the base point together with its exact linearization.
fn tangent_strang_step(
    base: &PhasePoint,
    deltas: &[PhasePoint],
    h: f64,
    kind: FlowKind,
) -> Result<(PhasePoint, Vec<PhasePoint>, f64)> {
    let half = free_evolve(base, 0.5 * h);
    let dhalf: Vec<PhasePoint> = deltas.iter().map(|d| free_evolve(d, 0.5 * h)).collect();
    let (force, quartic, lin) = force_and_linearization(&half.pos, kind)?;
    let kicked = PhasePoint {
        pos: half.pos.clone(),
        vel: half.vel.axpy(-h, &force),
    };
    let dpos: Vec<&FourierField> = dhalf.iter().map(|d| &d.pos).collect();
    let dforce = lin.apply(&dpos)?;
    let dkicked: Vec<PhasePoint> = dhalf
        .iter()
        .zip(&dforce)
        .map(|(d, f)| PhasePoint {
            pos: d.pos.clone(),
            vel: d.vel.axpy(-h, f),
        })
        .collect();
    Ok((
        free_evolve(&kicked, 0.5 * h),
        dkicked.iter().map(|d| free_evolve(d, 0.5 * h)).collect(),
        quartic,
    ))
}

/// Evolves a base point and any number of tangent vectors to `horizon`.
pub fn tangent_flow(
    base: &PhasePoint,
    deltas: &[PhasePoint],
    horizon: f64,
    cfg: &IntegratorConfig,
    kind: FlowKind,
) -> Result<(PhasePoint, Vec<PhasePoint>)> {
    cfg.validate()?;
    kind.validate()?;
    validate_samples(horizon, &[horizon])?;
    if deltas.iter().any(|d| d.grid() != base.grid()) {
        return Err(Error::GridMismatch(
            "tangent vectors must share the base grid".into(),
        ));
    }
    if kind == FlowKind::Free {
        return Ok((
            free_evolve(base, horizon),
            deltas.iter().map(|d| free_evolve(d, horizon)).collect(),
        ));
    }
    let mut monitor = Monitor {
        integral: 0.0,
        threshold: cfg.blowup_threshold,
    };
    let mut state = base.clone();
    let mut ds = deltas.to_vec();
    let mut t = 0.0;
    for h in steps_to(0.0, horizon, cfg.dt) {
        let (next, nd, quartic) = tangent_strang_step(&state, &ds, h, kind)?;
        t += h;
        if !next.is_finite() || nd.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite { time: t });
        }
        monitor.push(h, quartic, t)?;
        state = next;
        ds = nd;
    }
    Ok((state, ds))
}

/// Evolves the base point with Strang steps and both tangent vectors with the
/// exactly linearized Strang step.
pub fn tangent_evolve(
    tp: &TangentPair,
    horizon: f64,
    cfg: &IntegratorConfig,
    kind: FlowKind,
) -> Result<TangentPair> {
    let (base, ds) = tangent_flow(
        &tp.base,
        &[tp.delta_a.clone(), tp.delta_b.clone()],
        horizon,
        cfg,
        kind,
    )?;
    let mut it = ds.into_iter();
    Ok(TangentPair {
        base,
        delta_a: it.next().unwrap(),
        delta_b: it.next().unwrap(),
    })
}

/// Max modulus discrepancy between the `|k| > K` part of the truncated flow and
/// the free evolution of the `|k| > K` data, over `samples + 1` equispaced times.
pub fn high_low_decoupling_check(
    p: &PhasePoint,
    kind: FlowKind,
    cutoff_k: f64,
    horizon: f64,
    cfg: &IntegratorConfig,
    samples: usize,
) -> Result<f64> {
    match kind {
        FlowKind::Full => {
            return Err(Error::InvalidArgument(
                "the full flow does not decouple high frequencies".into(),
            ))
        }
        FlowKind::Truncated(n) if cutoff_k < 2.0 * n => {
            return Err(Error::InvalidArgument(format!(
                "need K >= 2N so that the sharp projector fixes P_N (K = {cutoff_k}, N = {n})"
            )))
        }
        _ => {}
    }
    let high = |q: &PhasePoint| {
        q.apply_multiplier(|k| {
            if (crate::spectral::norm_sq(k) as f64) > cutoff_k * cutoff_k {
                1.0
            } else {
                0.0
            }
        })
    };
    let times = uniform_times(horizon, samples);
    let traj = evolve(p, horizon, cfg, kind, &times)?;
    let high0 = high(p);
    Ok(traj
        .times
        .iter()
        .zip(&traj.points)
        .map(|(&t, q)| high(q).max_abs_diff(&free_evolve(&high0, t)))
        .fold(0.0, f64::max))
}
