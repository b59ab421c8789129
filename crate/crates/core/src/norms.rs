//! Space-time norm estimators on sampled solutions.
//!
//! Every estimator works on uniformly spaced time samples of a field. The
//! `V^p` norm is computed exactly over partitions at the sample times, which
//! makes it a lower bound of the continuum norm.

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::spectral::{
    bracket, littlewood_paley_block, norm_sq, to_physical, FourierField, SpectralGrid, Wavevector,
};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Smooth time cutoff used before transforming in time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// C^∞ bump equal to 1 on the middle half of the interval and 0 at its ends.
    Bump,
}

fn h(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn smooth_step(x: f64) -> f64 {
    h(x) / (h(x) + h(1.0 - x))
}

impl Window {
    /// `η(t)` on `[t0, t0 + len]`.
    pub fn eval(&self, t: f64, t0: f64, len: f64) -> f64 {
        match self {
            Window::Bump => {
                let x = (t - t0) / len;
                if !(0.0..=1.0).contains(&x) {
                    0.0
                } else if x < 0.25 {
                    smooth_step(4.0 * x)
                } else if x > 0.75 {
                    smooth_step(4.0 * (1.0 - x))
                } else {
                    1.0
                }
            }
        }
    }
}

/// Uniformly spaced samples `u(t_j)` of a field on `[t_0, t_{M-1}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeSamples {
    times: Vec<f64>,
    fields: Vec<FourierField>,
    window: Option<Window>,
}

impl SpaceTimeSamples {
    pub fn new(times: Vec<f64>, fields: Vec<FourierField>, window: Option<Window>) -> Result<Self> {
        if times.len() != fields.len() || times.is_empty() {
            return Err(Error::InvalidArgument(
                "need one field per time and at least one sample".into(),
            ));
        }
        if fields.iter().any(|f| f.grid() != fields[0].grid()) {
            return Err(Error::GridMismatch("samples must share a grid".into()));
        }
        if times.len() > 1 {
            let dt = times[1] - times[0];
            if !(dt > 0.0) {
                return Err(Error::InvalidArgument("times must be increasing".into()));
            }
            for w in times.windows(2) {
                if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
                    return Err(Error::InvalidArgument("times must be uniformly spaced".into()));
                }
            }
        }
        Ok(Self {
            times,
            fields,
            window,
        })
    }

    /// Position fields of a trajectory recorded at uniform times.
    pub fn from_trajectory(traj: &Trajectory, window: Option<Window>) -> Result<Self> {
        Self::new(
            traj.times.clone(),
            traj.points.iter().map(|p| p.pos.clone()).collect(),
            window,
        )
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[FourierField] {
        &self.fields
    }

    pub fn window(&self) -> Option<Window> {
        self.window
    }

    pub fn with_window(mut self, window: Option<Window>) -> Self {
        self.window = window;
        self
    }

    pub fn grid(&self) -> SpectralGrid {
        self.fields[0].grid()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            times: self.times.clone(),
            fields: self.fields.iter().map(|f| f.scale(c)).collect(),
            window: self.window,
        }
    }

    fn spatial_means(&self, transform: impl Fn(&FourierField) -> FourierField, r: f64) -> Result<Vec<f64>> {
        let n = self.grid().n_phys();
        self.fields
            .iter()
            .map(|f| {
                let phys = to_physical(&transform(f), n)?;
                Ok(if r.is_infinite() {
                    phys.max_abs()
                } else {
                    phys.mean_abs_pow(r)
                })
            })
            .collect()
    }
}

/// Composite trapezoid over uniformly spaced values.
fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        m => dt * (values[1..m - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[m - 1])),
    }
}

/// `‖u‖_{L^q_t L^r_x}`: spatial quadrature on the padded grid, trapezoid in time.
pub fn strichartz_norm(s: &SpaceTimeSamples, q: f64, r: f64) -> Result<f64> {
    if !(q >= 1.0) || !(r >= 1.0) {
        return Err(Error::InvalidArgument(format!("need q, r >= 1, got ({q}, {r})")));
    }
    let inner: Vec<f64> = s
        .spatial_means(|f| f.clone(), r)?
        .into_iter()
        .map(|m| if r.is_infinite() { m } else { m.powf(1.0 / r) })
        .collect();
    if q.is_infinite() {
        return Ok(inner.into_iter().fold(0.0, f64::max));
    }
    let integrand: Vec<f64> = inner.iter().map(|v| v.powf(q)).collect();
    Ok(trapezoid(&integrand, s.dt()).powf(1.0 / q))
}

/// Dyadic frequencies `1, 2, 4, ...` up to the first one whose smooth
/// projector is the identity on the box.
pub fn dyadic_frequencies(grid: SpectralGrid) -> Vec<f64> {
    let reach = (3.0f64).sqrt() * grid.kmax() as f64;
    let mut out = vec![1.0];
    while *out.last().unwrap() < reach {
        out.push(2.0 * out.last().unwrap());
    }
    out
}

/// `sup_J (Σ_N ‖P_N u‖²_{L⁴_{t,x}(J)})^{1/2}` over windows of unit length
/// starting at sample times (the whole interval if it is shorter).
pub fn z_norm(s: &SpaceTimeSamples) -> Result<f64> {
    let dyadics = dyadic_frequencies(s.grid());
    let blocks: Vec<Vec<f64>> = dyadics
        .iter()
        .map(|&n| s.spatial_means(|f| f.apply_multiplier(littlewood_paley_block(n)), 4.0))
        .collect::<Result<_>>()?;
    let m = s.times.len();
    let dt = s.dt();
    let span = if m > 1 && s.duration() > 1.0 {
        ((1.0 / dt) * (1.0 + 1e-12)).floor() as usize
    } else {
        m - 1
    };
    let mut best = 0.0f64;
    for start in 0..m - span {
        let total: f64 = blocks
            .iter()
            .map(|b| trapezoid(&b[start..=start + span], dt).sqrt())
            .sum();
        best = best.max(total);
    }
    Ok(best.sqrt())
}

/// Discrete `X^{s,b}` norm of the windowed samples.
///
/// `û(n, τ_m) = Δt Σ_j e^{-iτ_m t_j} η(t_j) û(n, t_j)` on the DFT dual grid,
/// and the τ-integral is the Riemann sum with `Δτ / 2π`.
pub fn xsb_norm(s: &SpaceTimeSamples, sv: f64, b: f64) -> Result<f64> {
    let window = s
        .window
        .ok_or_else(|| Error::InvalidArgument("X^{s,b} needs a smooth time window on the samples".into()))?;
    let m = s.times.len();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "X^{s,b} needs at least two samples".into(),
        ));
    }
    let (t0, len, dt) = (s.times[0], s.duration(), s.dt());
    let eta: Vec<f64> = s.times.iter().map(|&t| window.eval(t, t0, len)).collect();
    let taus: Vec<f64> = (0..m)
        .map(|j| {
            let k = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
            std::f64::consts::TAU * k / (m as f64 * dt)
        })
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(m);
    let grid = s.grid();
    let mut line = vec![Complex64::default(); m];
    let mut total = 0.0;
    for (idx, k) in grid.wavevectors() {
        if s.fields.iter().all(|f| f.coeffs()[idx] == Complex64::default()) {
            continue;
        }
        for j in 0..m {
            line[j] = s.fields[j].coeffs()[idx] * eta[j];
        }
        fft.process(&mut line);
        let w = bracket(k);
        let spatial = w.powf(2.0 * sv);
        for (c, &tau) in line.iter().zip(&taus) {
            let modulation = (1.0 + (tau.abs() - w).powi(2)).powf(b);
            total += spatial * modulation * c.norm_sqr();
        }
    }
    // Δt² from the transform, Δτ/2π = 1/(MΔt) from the dual grid.
    Ok((total * dt / m as f64).sqrt())
}

/// `V^p` norm of samples under a metric `dist(i, j)`, exact over partitions
/// at sample times; `tail(i)` is the distance to a virtual final point.
pub fn vp_norm_by(
    len: usize,
    p: f64,
    dist: impl Fn(usize, usize) -> f64,
    tail: Option<&dyn Fn(usize) -> f64>,
) -> Result<f64> {
    if len < 2 {
        return Err(Error::InvalidArgument("V^p needs at least two samples".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("need p >= 1, got {p}")));
    }
    // best[j]: largest Σ‖Δ‖^p over chains that start at sample 0 and end at j.
    let mut best = vec![0.0f64; len];
    for j in 1..len {
        best[j] = (0..j).map(|i| best[i] + dist(i, j).powf(p)).fold(0.0, f64::max);
    }
    let mut value = best[len - 1];
    if let Some(tail) = tail {
        value = (0..len).map(|i| best[i] + tail(i).powf(p)).fold(value, f64::max);
    }
    Ok(value.powf(1.0 / p))
}

/// `V^p` of scalar samples.
pub fn vp_norm_scalar(values: &[f64], p: f64, zero_at_infinity: bool) -> Result<f64> {
    let tail = |i: usize| values[i].abs();
    vp_norm_by(
        values.len(),
        p,
        |i, j| (values[j] - values[i]).abs(),
        zero_at_infinity.then_some(&tail as &dyn Fn(usize) -> f64),
    )
}

/// `V^p` of vector samples in the Euclidean norm.
pub fn vp_norm(points: &[Vec<f64>], p: f64, zero_at_infinity: bool) -> Result<f64> {
    let euclid = |a: &[f64], b: Option<&[f64]>| -> f64 {
        a.iter()
            .enumerate()
            .map(|(i, x)| (x - b.map_or(0.0, |b| b[i])).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let tail = |i: usize| euclid(&points[i], None);
    vp_norm_by(
        points.len(),
        p,
        |i, j| euclid(&points[j], Some(&points[i])),
        zero_at_infinity.then_some(&tail as &dyn Fn(usize) -> f64),
    )
}

/// `V^p` of field samples in `H^s`.
pub fn vp_norm_fields(fields: &[FourierField], s: f64, p: f64, zero_at_infinity: bool) -> Result<f64> {
    let tail = |i: usize| fields[i].sobolev_norm(s);
    vp_norm_by(
        fields.len(),
        p,
        |i, j| fields[j].sub(&fields[i]).sobolev_norm(s),
        zero_at_infinity.then_some(&tail as &dyn Fn(usize) -> f64),
    )
}

/// Half-wave directions `e^{±it⟨∇⟩}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// Dyadic shell: `|k| <= 1` for `M = 1`, `M/2 < |k| <= M` otherwise.
pub fn in_dyadic_shell(k: Wavevector, m: f64) -> bool {
    let r2 = norm_sq(k) as f64;
    if m <= 1.0 {
        r2 <= 1.0
    } else {
        r2 > 0.25 * m * m && r2 <= m * m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearReport {
    pub m: f64,
    pub n: f64,
    pub o: f64,
    pub t: f64,
    pub measured: f64,
    /// `L ‖φ‖ ‖ψ‖`.
    pub bound_sep: f64,
    /// `(HL)^{1/2} ‖φ‖ ‖ψ‖`.
    pub bound_par: f64,
    /// Measured over the bound of the applicable branch.
    pub ratio: f64,
    pub separated: bool,
}

/// `M ≪ N` is taken to mean a dyadic gap of at least 4.
pub fn is_separated(m: f64, n: f64) -> bool {
    m.max(n) >= 4.0 * m.min(n)
}

/// Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(count: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(count);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    for i in 0..count {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (count as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=count {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if count == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = count as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((mid + half * x, half * w));
    }
    out
}

struct ShellData {
    kmax: i32,
    /// Dense coefficients on `[-kmax, kmax]³`.
    coeffs: Vec<Complex64>,
    omega: Vec<f64>,
    support: Vec<(Wavevector, Complex64, f64)>,
    norm: f64,
}

fn shell_data(f: &FourierField, m: f64) -> Result<ShellData> {
    let grid = f.grid();
    let kmax = grid.kmax() as i32;
    let mut coeffs = vec![Complex64::default(); grid.len()];
    let mut omega = vec![0.0; grid.len()];
    let mut support = Vec::new();
    let mut lattice_points = 0;
    let mut norm = 0.0;
    for (idx, k) in grid.wavevectors() {
        omega[idx] = bracket(k);
        if in_dyadic_shell(k, m) {
            lattice_points += 1;
            let c = f.coeffs()[idx];
            coeffs[idx] = c;
            norm += c.norm_sqr();
            if c != Complex64::default() {
                support.push((k, c, omega[idx]));
            }
        }
    }
    if lattice_points == 0 {
        return Err(Error::InvalidArgument(format!(
            "dyadic shell {m} has no lattice points on a kmax = {kmax} grid"
        )));
    }
    Ok(ShellData {
        kmax,
        coeffs,
        omega,
        support,
        norm: norm.sqrt(),
    })
}

/// `‖P_O(u_M v_N)‖_{L²_{t,x}([0,T]×T³)}` for half-waves `u_M = e^{±₁it⟨∇⟩}φ_M`,
/// `v_N = e^{±₂it⟨∇⟩}ψ_N`, with the inputs restricted to their dyadic shells.
///
/// The product is formed in Fourier space by direct convolution and the time
/// integral uses Gauss-Legendre nodes resolving the oscillation of `|P_O(uv)|²`.
#[allow(clippy::too_many_arguments)]
pub fn bilinear_measure(
    phi: &FourierField,
    m: f64,
    psi: &FourierField,
    n: f64,
    o: f64,
    t: f64,
    signs: (Sign, Sign),
) -> Result<BilinearReport> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument("T must be positive".into()));
    }
    // Convolve the smaller support against the dense box of the larger one.
    let (a, b, sa, sb) = {
        let x = shell_data(phi, m)?;
        let y = shell_data(psi, n)?;
        if x.support.len() <= y.support.len() {
            (x, y, signs.0.value(), signs.1.value())
        } else {
            (y, x, signs.1.value(), signs.0.value())
        }
    };
    let (low, high) = (m.min(n).min(o), m.max(n).max(o));
    let bound_sep = low * a.norm * b.norm;
    let bound_par = (high * low).sqrt() * a.norm * b.norm;
    let separated = is_separated(m, n);
    let mut measured = 0.0;
    if !a.support.is_empty() && !b.support.is_empty() {
        let reach = a.kmax + b.kmax;
        let side = (2 * reach + 1) as usize;
        let bside = (2 * b.kmax + 1) as usize;
        let block = littlewood_paley_block(o);
        let mut weights = vec![0.0; side * side * side];
        for x in -reach..=reach {
            for y in -reach..=reach {
                for z in -reach..=reach {
                    let i =
                        (((x + reach) as usize * side) + (y + reach) as usize) * side + (z + reach) as usize;
                    weights[i] = block([x, y, z]).powi(2);
                }
            }
        }
        // Phases of |P_O(uv)|² vary at most by twice the spread of ⟨k⟩ over the small support.
        let (wmin, wmax) = a
            .support
            .iter()
            .fold((f64::INFINITY, 0.0f64), |acc, s| (acc.0.min(s.2), acc.1.max(s.2)));
        let spread = 2.0
            * ((wmax - wmin)
                + 2.0
                    * a.support
                        .iter()
                        .map(|s| (norm_sq(s.0) as f64).sqrt())
                        .fold(0.0, f64::max));
        let nodes = gauss_legendre((0.5 * spread * t).ceil() as usize + 16, 0.0, t);
        let mut out = vec![Complex64::default(); side * side * side];
        let mut rotated = vec![Complex64::default(); b.coeffs.len()];
        for &(time, weight) in &nodes {
            for ((r, c), w) in rotated.iter_mut().zip(&b.coeffs).zip(&b.omega) {
                *r = *c * Complex64::from_polar(1.0, sb * w * time);
            }
            out.iter_mut().for_each(|c| *c = Complex64::default());
            for &(k1, c1, w1) in &a.support {
                let f = c1 * Complex64::from_polar(1.0, sa * w1 * time);
                for bx in 0..bside {
                    let ox = bx as i32 - b.kmax + k1[0] + reach;
                    for by in 0..bside {
                        let oy = by as i32 - b.kmax + k1[1] + reach;
                        let src = (bx * bside + by) * bside;
                        let dst =
                            ((ox as usize * side) + oy as usize) * side + (k1[2] - b.kmax + reach) as usize;
                        for (o, c) in out[dst..dst + bside].iter_mut().zip(&rotated[src..src + bside]) {
                            *o += f * *c;
                        }
                    }
                }
            }
            let slice: f64 = out.iter().zip(&weights).map(|(c, w)| w * c.norm_sqr()).sum();
            measured += weight * slice;
        }
        measured = measured.sqrt();
    }
    let bound = if separated { bound_sep } else { bound_par };
    Ok(BilinearReport {
        m,
        n,
        o,
        t,
        measured,
        bound_sep,
        bound_par,
        ratio: if bound > 0.0 { measured / bound } else { 0.0 },
        separated,
    })
}

/// Running `‖u‖_{L⁴_{t,x}([0,t_i])}` and the first time it exceeds `threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L4Monitor {
    pub times: Vec<f64>,
    pub running: Vec<f64>,
    pub crossing: Option<f64>,
}

pub fn l4_monitor(s: &SpaceTimeSamples, threshold: f64) -> Result<L4Monitor> {
    let quartic = s.spatial_means(|f| f.clone(), 4.0)?;
    let mut cumulative = vec![0.0; quartic.len()];
    for i in 1..quartic.len() {
        cumulative[i] =
            cumulative[i - 1] + 0.5 * (s.times[i] - s.times[i - 1]) * (quartic[i - 1] + quartic[i]);
    }
    let crossing = if threshold <= 0.0 {
        quartic.iter().position(|&q| q > 0.0).map(|i| s.times[i])
    } else {
        let target = threshold.powi(4);
        cumulative.iter().position(|&c| c > target).map(|i| {
            let (c0, c1) = (cumulative[i - 1], cumulative[i]);
            s.times[i - 1] + (target - c0) / (c1 - c0) * (s.times[i] - s.times[i - 1])
        })
    };
    Ok(L4Monitor {
        times: s.times.clone(),
        running: cumulative.iter().map(|c| c.powf(0.25)).collect(),
        crossing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::free_evolve;
    use crate::spectral::PhasePoint;

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
        move || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }
    }

    fn random_field(g: SpectralGrid, seed: u64, decay: f64) -> FourierField {
        let mut r = lcg(seed);
        FourierField::from_fn(g, |k| Complex64::new(r(), r()) * bracket(k).powf(-decay))
    }

    fn uniform(t_end: f64, m: usize) -> Vec<f64> {
        (0..m).map(|j| t_end * j as f64 / (m - 1) as f64).collect()
    }

    fn constant_in_space(values: &[f64], g: SpectralGrid) -> Vec<FourierField> {
        values.iter().map(|&v| FourierField::constant(g, v)).collect()
    }

    #[test]
    fn strichartz_examples() {
        let g = SpectralGrid::new(1).unwrap();
        let times = uniform(std::f64::consts::TAU, 201);
        let vals: Vec<f64> = times.iter().map(|t| t.cos()).collect();
        let s = SpaceTimeSamples::new(times.clone(), constant_in_space(&vals, g), None).unwrap();
        let expected = (3.0 * std::f64::consts::PI / 4.0).powf(0.25);
        assert!((strichartz_norm(&s, 4.0, 4.0).unwrap() - expected).abs() < 1e-12);
        assert!((strichartz_norm(&s, f64::INFINITY, 4.0).unwrap() - 1.0).abs() < 1e-12);
        let zero = s.scale(0.0);
        assert_eq!(strichartz_norm(&zero, 4.0, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn strichartz_l2_matches_parseval() {
        let g = SpectralGrid::new(3).unwrap();
        let p = PhasePoint::new(random_field(g, 1, 1.0), random_field(g, 2, 0.0)).unwrap();
        let times = uniform(1.0, 11);
        let fields: Vec<FourierField> = times.iter().map(|&t| free_evolve(&p, t).pos).collect();
        let parseval: Vec<f64> = fields.iter().map(|f| f.l2_norm().powi(2)).collect();
        let oracle = trapezoid(&parseval, 0.1).sqrt();
        let s = SpaceTimeSamples::new(times, fields, None).unwrap();
        let v = strichartz_norm(&s, 2.0, 2.0).unwrap();
        assert!((v - oracle).abs() <= 1e-10 * oracle, "{v} vs {oracle}");
    }

    #[test]
    fn samples_validation() {
        let g = SpectralGrid::new(1).unwrap();
        let f = constant_in_space(&[1.0, 1.0, 1.0], g);
        assert!(SpaceTimeSamples::new(vec![0.0, 0.1, 0.3], f.clone(), None).is_err());
        assert!(SpaceTimeSamples::new(vec![0.0, 0.1], f, None).is_err());
    }

    #[test]
    fn z_norm_examples() {
        let g = SpectralGrid::new(4).unwrap();
        let times = uniform(2.0, 41);
        let zero = SpaceTimeSamples::new(times.clone(), vec![FourierField::zeros(g); 41], None).unwrap();
        assert_eq!(z_norm(&zero).unwrap(), 0.0);
        // A constant field lives in the N = 1 block only.
        let vals: Vec<f64> = times.iter().map(|t| 1.0 + t).collect();
        let s = SpaceTimeSamples::new(times.clone(), constant_in_space(&vals, g), None).unwrap();
        let expected = (0..=20)
            .map(|start| {
                let q: Vec<f64> = vals[start..start + 21].iter().map(|v| v.powi(4)).collect();
                trapezoid(&q, 0.05).powf(0.25)
            })
            .fold(0.0, f64::max);
        assert!((z_norm(&s).unwrap() - expected).abs() < 1e-12);
        // Cauchy-Schwarz over blocks.
        let p = PhasePoint::new(random_field(g, 3, 0.5), random_field(g, 4, 0.0)).unwrap();
        let fields: Vec<FourierField> = times.iter().map(|&t| free_evolve(&p, t).pos).collect();
        let s = SpaceTimeSamples::new(times.clone(), fields.clone(), None).unwrap();
        let z = z_norm(&s).unwrap();
        let first = SpaceTimeSamples::new(times[..21].to_vec(), fields[..21].to_vec(), None).unwrap();
        let l4 = strichartz_norm(&first, 4.0, 4.0).unwrap();
        let blocks = dyadic_frequencies(g).len() as f64;
        assert!(z >= l4 / blocks.sqrt(), "{z} {l4}");
    }

    #[test]
    fn xsb_requires_window_and_is_homogeneous() {
        let g = SpectralGrid::new(3).unwrap();
        let p = PhasePoint::new(random_field(g, 5, 1.0), random_field(g, 6, 0.0)).unwrap();
        let times = uniform(2.0, 64);
        let fields: Vec<FourierField> = times.iter().map(|&t| free_evolve(&p, t).pos).collect();
        let s = SpaceTimeSamples::new(times, fields, None).unwrap();
        assert!(xsb_norm(&s, 0.5, 0.5).is_err());
        let s = s.with_window(Some(Window::Bump));
        let a = xsb_norm(&s, 0.5, 0.6).unwrap();
        let b = xsb_norm(&s.scale(-2.5), 0.5, 0.6).unwrap();
        assert!((b - 2.5 * a).abs() <= 1e-12 * b);
        assert_eq!(xsb_norm(&s.scale(0.0), 0.5, 0.6).unwrap(), 0.0);
    }

    #[test]
    fn xsb_with_b_zero_is_windowed_l2_of_sobolev_norms() {
        let g = SpectralGrid::new(3).unwrap();
        let p = PhasePoint::new(random_field(g, 7, 1.0), random_field(g, 8, 0.0)).unwrap();
        let times = uniform(1.5, 50);
        let fields: Vec<FourierField> = times.iter().map(|&t| free_evolve(&p, t).pos).collect();
        let s = SpaceTimeSamples::new(times.clone(), fields.clone(), Some(Window::Bump)).unwrap();
        let dt = times[1] - times[0];
        let direct: f64 = times
            .iter()
            .zip(&fields)
            .map(|(&t, f)| dt * (Window::Bump.eval(t, 0.0, 1.5) * f.sobolev_norm(0.7)).powi(2))
            .sum::<f64>()
            .sqrt();
        let v = xsb_norm(&s, 0.7, 0.0).unwrap();
        assert!((v - direct).abs() <= 1e-8 * direct);
    }

    #[test]
    fn xsb_of_free_waves_tracks_data_norm() {
        let g = SpectralGrid::new(3).unwrap();
        let (t_end, m) = (4.0, 256);
        let times = uniform(t_end, m);
        let dt = times[1] - times[0];
        // ‖η‖ weighted by ⟨τ⟩^{2b}: the modulation weight seen by a free wave.
        let b = 0.6;
        let eta: Vec<Complex64> = times
            .iter()
            .map(|&t| Complex64::new(Window::Bump.eval(t, 0.0, t_end), 0.0))
            .collect();
        let mut line = eta.clone();
        FftPlanner::new().plan_fft_forward(m).process(&mut line);
        let eta_norm = (line
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let k = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
                let tau = std::f64::consts::TAU * k / (m as f64 * dt);
                (1.0 + tau * tau).powf(b) * c.norm_sqr()
            })
            .sum::<f64>()
            * dt
            / m as f64)
            .sqrt();
        for seed in 0..5 {
            let p =
                PhasePoint::new(random_field(g, 10 + seed, 1.0), random_field(g, 20 + seed, 0.0)).unwrap();
            let p = p.scale(1.0 / p.pair_norm(0.5));
            let fields: Vec<FourierField> = times.iter().map(|&t| free_evolve(&p, t).pos).collect();
            let s = SpaceTimeSamples::new(times.clone(), fields, Some(Window::Bump)).unwrap();
            let ratio = xsb_norm(&s, 0.5, b).unwrap() / (eta_norm * p.pair_norm(0.5));
            assert!((1.0 / 3.0..=3.0).contains(&ratio), "seed {seed}: {ratio}");
        }
    }

    fn vp_brute(values: &[f64], p: f64) -> f64 {
        let m = values.len();
        let interior = m - 2;
        let mut best = 0.0f64;
        for mask in 0u32..(1 << interior) {
            let mut prev = values[0];
            let mut sum = 0.0;
            for (i, &v) in values.iter().enumerate().skip(1) {
                if i == m - 1 || mask & (1 << (i - 1)) != 0 {
                    sum += (v - prev).abs().powf(p);
                    prev = v;
                }
            }
            best = best.max(sum);
        }
        best.powf(1.0 / p)
    }

    #[test]
    fn vp_examples() {
        assert!((vp_norm_scalar(&[0.0, 1.0, 0.0], 2.0, false).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let mono = [0.0, 0.5, 0.7, 2.0, 3.5];
        assert!((vp_norm_scalar(&mono, 1.0, false).unwrap() - 3.5).abs() < 1e-15);
        assert_eq!(vp_norm_scalar(&[2.0; 6], 3.0, false).unwrap(), 0.0);
        // v(∞) = 0 turns a constant path into a single jump.
        assert!((vp_norm_scalar(&[2.0; 6], 3.0, true).unwrap() - 2.0).abs() < 1e-15);
        assert!(vp_norm_scalar(&[1.0], 2.0, false).is_err());
    }

    #[test]
    fn vp_matches_enumeration() {
        let mut r = lcg(99);
        for trial in 0..50 {
            let m = 2 + trial % 11;
            let values: Vec<f64> = (0..m).map(|_| r()).collect();
            for p in [1.0, 2.0, 3.5] {
                let dp = vp_norm_scalar(&values, p, false).unwrap();
                assert!((dp - vp_brute(&values, p)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn vp_fields_uses_sobolev_metric() {
        let g = SpectralGrid::new(2).unwrap();
        let a = random_field(g, 1, 0.0);
        let fields = vec![a.scale(0.0), a.clone(), a.scale(0.0)];
        let v = vp_norm_fields(&fields, 0.5, 2.0, false).unwrap();
        assert!((v - 2f64.sqrt() * a.sobolev_norm(0.5)).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let nodes = gauss_legendre(5, 0.0, 2.0);
        let integral: f64 = nodes.iter().map(|(x, w)| w * x.powi(9)).sum();
        assert!((integral - 2f64.powi(10) / 10.0).abs() < 1e-11);
        let osc: f64 = gauss_legendre(40, 0.0, 1.0)
            .iter()
            .map(|(x, w)| w * (30.0 * x).cos())
            .sum();
        assert!((osc - 30f64.sin() / 30.0).abs() < 1e-13);
    }

    #[test]
    fn bilinear_zero_mode_oracle() {
        let g = SpectralGrid::new(2).unwrap();
        let one = FourierField::constant(g, 1.0);
        for t in [0.5, 1.0, 2.0] {
            let r = bilinear_measure(&one, 1.0, &one, 1.0, 1.0, t, (Sign::Plus, Sign::Plus)).unwrap();
            assert!((r.measured - t.sqrt()).abs() < 1e-13);
            assert!(!r.separated);
        }
        let zero = FourierField::zeros(g);
        let r = bilinear_measure(&zero, 1.0, &one, 1.0, 1.0, 1.0, (Sign::Plus, Sign::Minus)).unwrap();
        assert_eq!(r.measured, 0.0);
        assert!(bilinear_measure(&one, 1.0, &one, 16.0, 1.0, 1.0, (Sign::Plus, Sign::Plus)).is_err());
    }

    /// `∫₀ᵀ |Σ_j a_j e^{iλ_j t}|² dt` summed over outputs, pair by pair.
    fn bilinear_exact(
        phi: &FourierField,
        m: f64,
        psi: &FourierField,
        n: f64,
        o: f64,
        t: f64,
        s: (f64, f64),
    ) -> f64 {
        let block = littlewood_paley_block(o);
        let mut terms: std::collections::HashMap<Wavevector, Vec<(Complex64, f64)>> = Default::default();
        for (k1, a) in phi.support() {
            if !in_dyadic_shell(k1, m) {
                continue;
            }
            for (k2, b) in psi.support() {
                if !in_dyadic_shell(k2, n) {
                    continue;
                }
                let k = [k1[0] + k2[0], k1[1] + k2[1], k1[2] + k2[2]];
                terms
                    .entry(k)
                    .or_default()
                    .push((a * b, s.0 * bracket(k1) + s.1 * bracket(k2)));
            }
        }
        let mut total = 0.0;
        for (k, list) in terms {
            let w = block(k).powi(2);
            for &(a, la) in &list {
                for &(b, lb) in &list {
                    let d = la - lb;
                    let e = if d.abs() < 1e-14 {
                        Complex64::new(t, 0.0)
                    } else {
                        (Complex64::new(0.0, d * t).exp() - 1.0) / Complex64::new(0.0, d)
                    };
                    total += w * (a * b.conj() * e).re;
                }
            }
        }
        total.sqrt()
    }

    #[test]
    fn bilinear_matches_exact_time_integral_and_sign_symmetry() {
        let g = SpectralGrid::new(4).unwrap();
        let phi = random_field(g, 31, 0.0);
        let psi = random_field(g, 32, 0.0);
        for (m, n, o) in [(1.0, 4.0, 4.0), (2.0, 2.0, 1.0), (2.0, 4.0, 2.0)] {
            let r = bilinear_measure(&phi, m, &psi, n, o, 1.3, (Sign::Plus, Sign::Minus)).unwrap();
            let exact = bilinear_exact(&phi, m, &psi, n, o, 1.3, (1.0, -1.0));
            assert!(
                (r.measured - exact).abs() <= 1e-10 * exact.max(1e-300),
                "{m} {n} {o}: {} vs {exact}",
                r.measured
            );
            let flipped = bilinear_measure(&phi, m, &psi, n, o, 1.3, (Sign::Minus, Sign::Plus)).unwrap();
            assert!((flipped.measured - r.measured).abs() <= 1e-10 * r.measured);
        }
    }

    #[test]
    fn l4_monitor_examples() {
        let g = SpectralGrid::new(1).unwrap();
        let times = uniform(10.0, 101);
        let zero = SpaceTimeSamples::new(times.clone(), vec![FourierField::zeros(g); 101], None).unwrap();
        assert_eq!(l4_monitor(&zero, 1.0).unwrap().crossing, None);
        let c = 1.3;
        let s = SpaceTimeSamples::new(times.clone(), constant_in_space(&vec![c; 101], g), None).unwrap();
        let mon = l4_monitor(&s, 2.0).unwrap();
        let expected = (2.0 / c).powi(4);
        assert!((mon.crossing.unwrap() - expected).abs() <= 0.05 * expected);
        assert!((mon.running[100] - c * 10f64.powf(0.25)).abs() < 1e-12);
        let mut vals = vec![0.0; 101];
        vals[7..].iter_mut().for_each(|v| *v = 1.0);
        let s = SpaceTimeSamples::new(times.clone(), constant_in_space(&vals, g), None).unwrap();
        assert_eq!(l4_monitor(&s, 0.0).unwrap().crossing, Some(times[7]));
    }
}
