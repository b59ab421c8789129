//! Symplectic form, energies, cylinder geometry and the non-squeezing witness search.

use crate::error::{Error, Result};
use crate::flow::{evolve, tangent_evolve, tangent_flow, FlowKind, IntegratorConfig, TangentPair};
use crate::spectral::{
    bracket, sharp_multiplier, smooth_multiplier, to_physical, FourierField, PhasePoint, Wavevector,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// `ω(a, b) = ∫ a₀ b₁ - a₁ b₀`.
pub fn omega(a: &PhasePoint, b: &PhasePoint) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch("omega needs points on one grid".into()));
    }
    let mut sum = Complex64::default();
    let mut scale = 0.0f64;
    for (((a0, a1), b0), b1) in a
        .pos
        .coeffs()
        .iter()
        .zip(a.vel.coeffs())
        .zip(b.pos.coeffs())
        .zip(b.vel.coeffs())
    {
        let term = a0 * b1.conj() - a1 * b0.conj();
        scale += term.norm();
        sum += term;
    }
    debug_assert!(sum.im.abs() <= 1e-10 * scale.max(1.0), "omega not real: {sum}");
    Ok(sum.re)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnergyKind {
    /// `½∫|∇u₀|² + u₀² + u₁² + ¼∫u₀⁴`.
    Full,
    /// Quadratic part of `Π_K p` plus `¼∫(P_N u₀)⁴`; needs `K >= 2N`.
    TruncatedPair { n: f64, k: f64 },
    /// `½∫|∇w|² + w² + w_t² + ½∫w⁴`.
    Inhomogeneous,
    /// Quadratic part only, conserved by the free flow.
    Free,
}

fn quadratic_energy(p: &PhasePoint) -> f64 {
    0.5 * (p.pos.sobolev_norm_sq(1.0) + p.vel.sobolev_norm_sq(0.0))
}

fn quartic_mean(f: &FourierField) -> Result<f64> {
    Ok(to_physical(f, f.grid().n_phys())?.mean_abs_pow(4.0))
}

pub fn energy(p: &PhasePoint, kind: EnergyKind) -> Result<f64> {
    match kind {
        EnergyKind::Full => Ok(quadratic_energy(p) + 0.25 * quartic_mean(&p.pos)?),
        EnergyKind::Free => Ok(quadratic_energy(p)),
        EnergyKind::Inhomogeneous => Ok(quadratic_energy(p) + 0.5 * quartic_mean(&p.pos)?),
        EnergyKind::TruncatedPair { n, k } => {
            if !(n > 0.0) || k < 2.0 * n {
                return Err(Error::InvalidArgument(format!(
                    "truncated energy needs N > 0 and K >= 2N (N = {n}, K = {k})"
                )));
            }
            let low = p.apply_multiplier(sharp_multiplier(k));
            let projected = p.pos.apply_multiplier(smooth_multiplier(n));
            Ok(quadratic_energy(&low) + 0.25 * quartic_mean(&projected)?)
        }
    }
}

/// `C_r(z; k₀)`: `⟨k₀⟩|û₀(k₀) - z₀|² + ⟨k₀⟩⁻¹|û₁(k₀) - z₁|² <= r²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderSpec {
    pub k0: Wavevector,
    pub z0: Complex64,
    pub z1: Complex64,
    pub r: f64,
}

impl CylinderSpec {
    pub fn new(k0: Wavevector, z0: Complex64, z1: Complex64, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cylinder radius must be positive, got {r}"
            )));
        }
        Ok(Self { k0, z0, z1, r })
    }

    pub fn contains(&self, p: &PhasePoint) -> Result<bool> {
        Ok(cylinder_functional(p, self)? <= self.r)
    }
}

/// Ball of radius `R` about `center` in `H^{1/2} × H^{-1/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BallSpec {
    pub center: PhasePoint,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: PhasePoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn distance(&self, q: &PhasePoint) -> f64 {
        q.sub(&self.center).pair_norm(0.5)
    }

    /// Radial projection onto the ball.
    pub fn project(&self, q: &PhasePoint) -> PhasePoint {
        let d = self.distance(q);
        if d <= self.radius {
            q.clone()
        } else {
            self.center.axpy(self.radius / d, &q.sub(&self.center))
        }
    }
}

fn check_k0(p: &PhasePoint, k0: Wavevector) -> Result<()> {
    if !p.grid().contains(k0) {
        return Err(Error::InvalidArgument(format!(
            "k0 = {k0:?} is outside the kmax = {} box",
            p.grid().kmax()
        )));
    }
    Ok(())
}

pub fn cylinder_functional(p: &PhasePoint, cyl: &CylinderSpec) -> Result<f64> {
    check_k0(p, cyl.k0)?;
    let w = bracket(cyl.k0);
    let d0 = p.pos.coeff(cyl.k0) - cyl.z0;
    let d1 = p.vel.coeff(cyl.k0) - cyl.z1;
    Ok((w * d0.norm_sqr() + d1.norm_sqr() / w).sqrt())
}

/// `|ω(δa(T), δb(T)) - ω(δa(0), δb(0))|` along the tangent flow.
pub fn symplecticity_defect(
    tp: &TangentPair,
    horizon: f64,
    cfg: &IntegratorConfig,
    kind: FlowKind,
) -> Result<f64> {
    let before = omega(&tp.delta_a, &tp.delta_b)?;
    let after = tangent_evolve(tp, horizon, cfg, kind)?;
    Ok((omega(&after.delta_a, &after.delta_b)? - before).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WitnessOptions {
    pub step: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        Self {
            step: 0.5,
            max_iters: 200,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub g: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WitnessResult {
    pub witness: PhasePoint,
    pub functional_value: f64,
    pub iterations: usize,
    /// `true` once the image leaves the cylinder by more than `tol` (or the
    /// gradient vanishes); `false` means inconclusive, not a refutation.
    pub converged: bool,
    pub escaped: bool,
    pub trace: Vec<TraceRow>,
}

/// Directions `Re`/`Im` of mode `±k₀` in position and velocity, each of unit
/// `H^{1/2} × H^{-1/2}` norm and mutually orthogonal.
pub fn mode_directions(grid: crate::spectral::SpectralGrid, k0: Wavevector) -> Result<Vec<PhasePoint>> {
    let w = bracket(k0);
    let zero = k0 == [0, 0, 0];
    let mult = if zero { 1.0 } else { 2.0 };
    let pos_scale = 1.0 / (mult * w).sqrt();
    let vel_scale = (w / mult).sqrt();
    let units: &[Complex64] = if zero {
        &[Complex64::new(1.0, 0.0)]
    } else {
        &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]
    };
    let mut out = Vec::new();
    for (slot, scale) in [(0, pos_scale), (1, vel_scale)] {
        for &u in units {
            let f = FourierField::single_mode(grid, k0, u * scale)?;
            let z = FourierField::zeros(grid);
            out.push(if slot == 0 {
                PhasePoint::new(f, z)?
            } else {
                PhasePoint::new(z, f)?
            });
        }
    }
    Ok(out)
}

fn image(q: &PhasePoint, horizon: f64, kind: FlowKind, cfg: &IntegratorConfig) -> Result<PhasePoint> {
    if horizon == 0.0 {
        return Ok(q.clone());
    }
    Ok(evolve(q, horizon, cfg, kind, &[horizon])?.last().clone())
}

/// Projected gradient ascent of `G(q) = cylinder_functional(Φ(T) q)` over the
/// slice of the ball spanned by the mode-`k₀` directions through its center.
pub fn witness_search(
    ball: &BallSpec,
    cyl: &CylinderSpec,
    horizon: f64,
    kind: FlowKind,
    cfg: &IntegratorConfig,
    opt: &WitnessOptions,
) -> Result<WitnessResult> {
    check_k0(&ball.center, cyl.k0)?;
    if !(opt.step > 0.0) || !(opt.tol > 0.0) {
        return Err(Error::InvalidArgument(
            "witness step and tol must be positive".into(),
        ));
    }
    let dirs = mode_directions(ball.center.grid(), cyl.k0)?;
    let point = |x: &[f64]| {
        x.iter()
            .zip(&dirs)
            .fold(ball.center.clone(), |acc, (c, d)| acc.axpy(*c, d))
    };
    let project = |x: &mut Vec<f64>| {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > ball.radius {
            x.iter_mut().for_each(|v| *v *= ball.radius / norm);
        }
    };
    let value =
        |x: &[f64]| -> Result<f64> { cylinder_functional(&image(&point(x), horizon, kind, cfg)?, cyl) };

    let mut x = vec![0.0; dirs.len()];
    x[0] = ball.radius;
    let mut g = value(&x)?;
    let mut trace = vec![TraceRow {
        iter: 0,
        g,
        grad_norm: f64::NAN,
        step: 0.0,
    }];
    let target = cyl.r + opt.tol;
    let mut iterations = 0;
    let mut converged = g > target;
    let mut step = opt.step;
    while !converged && iterations < opt.max_iters {
        iterations += 1;
        let grad = gradient(&point(&x), &dirs, cyl, horizon, kind, cfg)?;
        let grad_norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if grad_norm < opt.tol {
            converged = true;
            trace.push(TraceRow {
                iter: iterations,
                g,
                grad_norm,
                step: 0.0,
            });
            break;
        }
        // Backtracking: halve from the configured step until G increases.
        let mut accepted = None;
        let mut trial_step = step.max(opt.step * 1e-6);
        for _ in 0..30 {
            let mut trial: Vec<f64> = x
                .iter()
                .zip(&grad)
                .map(|(a, d)| a + trial_step * d / grad_norm)
                .collect();
            project(&mut trial);
            let gt = value(&trial)?;
            if gt > g {
                accepted = Some((trial, gt));
                break;
            }
            trial_step *= 0.5;
        }
        match accepted {
            Some((trial, gt)) => {
                x = trial;
                g = gt;
                step = (2.0 * trial_step).min(opt.step);
                trace.push(TraceRow {
                    iter: iterations,
                    g,
                    grad_norm,
                    step: trial_step,
                });
                converged = g > target;
            }
            None => {
                trace.push(TraceRow {
                    iter: iterations,
                    g,
                    grad_norm,
                    step: 0.0,
                });
                break;
            }
        }
    }
    let witness = point(&x);
    debug_assert!(ball.distance(&witness) <= ball.radius + 1e-9);
    Ok(WitnessResult {
        witness,
        functional_value: g,
        iterations,
        converged,
        escaped: g > cyl.r,
        trace,
    })
}

/// `∇G` in the coordinates of `dirs`, via one tangent solve per direction.
fn gradient(
    q: &PhasePoint,
    dirs: &[PhasePoint],
    cyl: &CylinderSpec,
    horizon: f64,
    kind: FlowKind,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let (base, tangents) = if horizon == 0.0 {
        (q.clone(), dirs.to_vec())
    } else {
        tangent_flow(q, dirs, horizon, cfg, kind)?
    };
    let w = bracket(cyl.k0);
    let d0 = base.pos.coeff(cyl.k0) - cyl.z0;
    let d1 = base.vel.coeff(cyl.k0) - cyl.z1;
    let g = (w * d0.norm_sqr() + d1.norm_sqr() / w).sqrt();
    if g == 0.0 {
        // On the axis G is not differentiable; every direction with a nonzero
        // image ascends, weighted by how fast it leaves the axis.
        return Ok(tangents
            .iter()
            .map(|t| (w * t.pos.coeff(cyl.k0).norm_sqr() + t.vel.coeff(cyl.k0).norm_sqr() / w).sqrt())
            .collect());
    }
    Ok(tangents
        .iter()
        .map(|t| {
            let e0 = t.pos.coeff(cyl.k0);
            let e1 = t.vel.coeff(cyl.k0);
            (w * (d0.conj() * e0).re + (d1.conj() * e1).re / w) / g
        })
        .collect())
}
