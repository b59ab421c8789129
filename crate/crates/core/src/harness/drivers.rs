//! Experiment drivers. Each returns a report whose checks encode the
//! acceptance rule of the experiment; a datum that blows up is logged in
//! `skipped` and left out of the aggregates.

use super::config::{LoadedConfig, TailBase};
use super::report::{Cell, ExperimentReport, Fit, Table};
use crate::error::{Error, Result};
use crate::flow::{evolve, free_evolve, uniform_times, FlowKind, IntegratorConfig, Trajectory};
use crate::norms::{
    bilinear_measure, is_separated, l4_monitor, strichartz_norm, vp_norm_fields, xsb_norm, z_norm, Sign,
    SpaceTimeSamples, Window,
};
use crate::random::{
    gaussian_multiplier, linear_fit, quantile_grid, randomize, sigma_lambda_proxy, tail_statistics, BasePair,
    RandomSeed, SigmaProxyConfig, SigmaVerdict,
};
use crate::spectral::snapshot::load_phase_point;
use crate::spectral::{
    bracket, cubic_power, norm_sq, sharp_multiplier, smooth_multiplier, to_physical, FourierField,
    PhasePoint, SpectralGrid,
};
use crate::symplectic::{energy, witness_search, BallSpec, CylinderSpec, EnergyKind, WitnessOptions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

/// Streams 0 and 1 belong to the data randomization.
const DIRECTION_STREAM: u64 = 2;
const PERTURB_STREAM: u64 = 3;

/// `(N, error)` for one datum and cutoff.
type ErrorCell = (f64, Result<f64>);

/// Failures that disqualify one datum rather than the whole run.
fn per_datum(e: &Error) -> bool {
    matches!(
        e,
        Error::BlowUp { .. } | Error::NonFinite { .. } | Error::PicardNotConverged { .. }
    )
}

fn base_pair(cfg: &LoadedConfig, grid: SpectralGrid) -> Result<BasePair> {
    let d = &cfg.config.data;
    match &d.base {
        Some(path) => {
            let p = load_phase_point(path, None).map_err(|e| cfg.error("data", "base", e))?;
            Ok(BasePair::from_point(&p.resample(grid)))
        }
        None => {
            if !(d.amplitude >= 0.0) || !d.decay.is_finite() {
                return Err(cfg.error("data", "amplitude", "amplitude must be >= 0 and decay finite"));
            }
            Ok(BasePair::power_law(grid, d.amplitude, d.decay))
        }
    }
}

/// Complex Gaussian coefficients on the modes selected by `mask`, Hermitian.
fn gaussian_field(
    grid: SpectralGrid,
    seed: u64,
    stream: u64,
    mask: impl Fn([i32; 3]) -> bool,
) -> FourierField {
    FourierField::from_fn(grid, |k| {
        if mask(k) {
            gaussian_multiplier(RandomSeed(seed), stream, k)
        } else {
            Complex64::default()
        }
    })
}

/// A random phase point supported on `mask` with `H^{1/2} × H^{-1/2}` norm `norm`.
fn random_direction(
    grid: SpectralGrid,
    seed: u64,
    stream: u64,
    norm: f64,
    mask: impl Fn([i32; 3]) -> bool + Copy,
) -> Result<PhasePoint> {
    let pos = gaussian_field(grid, seed, stream, mask);
    let vel = gaussian_field(grid, seed, stream + 1000, mask);
    let p = PhasePoint::new(pos, vel)?;
    let size = p.pair_norm(0.5);
    if size == 0.0 {
        return Err(Error::InvalidArgument(
            "no lattice points in the requested support".into(),
        ));
    }
    Ok(p.scale(norm / size))
}

fn sup_discrepancy(a: &Trajectory, b: &Trajectory) -> f64 {
    a.points
        .iter()
        .zip(&b.points)
        .map(|(x, y)| x.sub(y).pair_norm(0.5))
        .fold(0.0, f64::max)
}

/// Strictly decreasing, or identically zero (the truncation is exact there).
fn strictly_decreasing(v: &[f64]) -> bool {
    v.iter().all(|&x| x == 0.0) || v.windows(2).all(|w| w[1] < w[0])
}

fn finish(mut report: ExperimentReport, start: Instant) -> ExperimentReport {
    report.wall_clock_s = start.elapsed().as_secs_f64();
    report
}

fn sigma_label(p: &PhasePoint, cfg: &LoadedConfig, horizon: f64, icfg: &IntegratorConfig) -> Result<String> {
    let d = &cfg.config.data;
    let Some(lambda) = d.lambda else {
        return Ok("unchecked".into());
    };
    let proxy = SigmaProxyConfig {
        horizon,
        lambda,
        gamma: d.gamma,
        truncation: d.proxy_truncation,
        samples: cfg.config.flow.samples,
        ..SigmaProxyConfig::default()
    };
    Ok(
        match sigma_lambda_proxy(p, &proxy, icfg).map_err(|e| cfg.error("data", "lambda", e))? {
            SigmaVerdict::Decided { member: true, .. } => "member".into(),
            SigmaVerdict::Decided { member: false, .. } => "non_member".into(),
            SigmaVerdict::Indeterminate { .. } => "indeterminate".into(),
        },
    )
}

fn cutoffs_below(ns: &[f64], kmax: usize) -> Vec<f64> {
    let mut v: Vec<f64> = ns.iter().copied().filter(|&n| n < 2.0 * kmax as f64).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `sup_t ‖Φ(t)p - Φ_N(t)p‖_{H^{1/2}×H^{-1/2}}` per seed and `N`.
pub fn run_convergence(cfg: &LoadedConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let grid = cfg.grid()?;
    let icfg = cfg.integrator()?;
    let horizon = cfg.horizon()?;
    let seeds = cfg.seeds()?.to_vec();
    let ns = cfg.sweep("n")?;
    let base = base_pair(cfg, grid)?;
    let times = uniform_times(horizon, cfg.config.flow.samples);

    type Cellwise = Vec<(f64, Result<f64>)>;
    let outcomes: Vec<Result<(PhasePoint, String, Cellwise)>> = seeds
        .par_iter()
        .map(|&seed| {
            let p = randomize(&base, RandomSeed(seed));
            let sigma = sigma_label(&p, cfg, horizon, &icfg)?;
            let full = evolve(&p, horizon, &icfg, FlowKind::Full, &times)?;
            let cells = ns
                .iter()
                .map(|&n| {
                    let e = evolve(&p, horizon, &icfg, FlowKind::Truncated(n), &times)
                        .map(|t| sup_discrepancy(&full, &t));
                    (n, e)
                })
                .collect();
            Ok((p, sigma, cells))
        })
        .collect();

    let mut report = ExperimentReport::new("converge", cfg);
    let mut table = Table::new("convergence", &["seed", "n", "sup_error", "sigma"]);
    let mut exact_worst = 0.0f64;
    let mut exact_seen = false;
    let mut monotone_fail = Vec::new();
    for (&seed, outcome) in seeds.iter().zip(outcomes) {
        let (p, sigma, cells) = match outcome {
            Ok(x) => x,
            Err(e) if per_datum(&e) => {
                report.skip(format!("seed {seed}"), &e);
                continue;
            }
            Err(e) => return Err(e),
        };
        report.snapshots.push((format!("data_seed{seed}.kgsq"), p));
        let mut below = Vec::new();
        for (n, e) in cells {
            match e {
                Ok(err) => {
                    table.push(vec![seed.into(), n.into(), err.into(), sigma.clone().into()]);
                    if n >= 2.0 * grid.kmax() as f64 {
                        exact_seen = true;
                        exact_worst = exact_worst.max(err);
                    } else {
                        below.push((n, err));
                    }
                }
                Err(e) if per_datum(&e) => report.skip(format!("seed {seed}, N = {n}"), &e),
                Err(e) => return Err(e),
            }
        }
        below.sort_by(|a, b| a.0.total_cmp(&b.0));
        let errs: Vec<f64> = below.iter().map(|x| x.1).collect();
        if horizon > 0.0 && !strictly_decreasing(&errs) {
            monotone_fail.push(seed);
        }
    }
    report.tables.push(table);
    if exact_seen {
        report.add_check(
            "exactness",
            exact_worst <= 1e-10,
            format!("max error for N >= 2 kmax: {exact_worst:e} (limit 1e-10)"),
        );
    }
    let below = cutoffs_below(&ns, grid.kmax());
    if below.len() >= 2 && horizon > 0.0 {
        report.add_check(
            "monotone",
            monotone_fail.is_empty(),
            format!("N in {below:?}; seeds not strictly decreasing: {monotone_fail:?}"),
        );
    }
    Ok(finish(report, start))
}

/// Max over data in `u* + Π_{N'}B_R` of the sup-in-time discrepancy per `N`.
pub fn run_local_uniform(cfg: &LoadedConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let grid = cfg.grid()?;
    let icfg = cfg.integrator()?;
    let horizon = cfg.horizon()?;
    let seed = cfg.seeds()?[0];
    let ns = cfg.sweep("n")?;
    let n_primes = cfg.sweep("n_prime")?;
    let lu = cfg.config.local_uniform;
    if !(lu.radius >= 0.0) || lu.count == 0 || !(lu.epsilon > 0.0) || !(lu.sigma_scale > 0.0) {
        return Err(cfg.error(
            "local_uniform",
            "",
            "need radius >= 0, count >= 1, epsilon > 0, sigma_scale > 0",
        ));
    }
    let center = randomize(&base_pair(cfg, grid)?, RandomSeed(seed));

    let mut report = ExperimentReport::new("local-uniform", cfg);
    let mut summary = Table::new(
        "local_uniform",
        &["n_prime", "sigma", "n", "max_error", "data_used"],
    );
    let mut detail = Table::new(
        "local_uniform_data",
        &["n_prime", "datum", "radius", "n", "sup_error"],
    );
    let mut failures = Vec::new();
    for &np in &n_primes {
        let sigma = if lu.radius > 0.0 {
            (lu.sigma_scale * lu.epsilon / (np * np * lu.radius.powi(4))).min(horizon)
        } else {
            horizon
        };
        let times = uniform_times(sigma, cfg.config.flow.samples);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ np.to_bits());
        let radii: Vec<f64> = (0..lu.count)
            .map(|i| {
                let u: f64 = rng.random();
                lu.radius * if i % 2 == 0 { 1.0 } else { u }
            })
            .collect();
        let rows: Vec<Result<Vec<ErrorCell>>> = radii
            .par_iter()
            .enumerate()
            .map(|(i, &r)| {
                let q = if r > 0.0 {
                    let dir = random_direction(grid, seed, DIRECTION_STREAM + 2 * i as u64 * 7919, r, |k| {
                        (norm_sq(k) as f64) <= np * np
                    })?;
                    center.add(&dir)
                } else {
                    center.clone()
                };
                let full = evolve(&q, sigma, &icfg, FlowKind::Full, &times)?;
                Ok(ns
                    .iter()
                    .map(|&n| {
                        let e = evolve(&q, sigma, &icfg, FlowKind::Truncated(n), &times)
                            .map(|t| sup_discrepancy(&full, &t));
                        (n, e)
                    })
                    .collect())
            })
            .collect();
        let mut worst = vec![0.0f64; ns.len()];
        let mut used = vec![0usize; ns.len()];
        for (i, row) in rows.into_iter().enumerate() {
            let cells = match row {
                Ok(c) => c,
                Err(e) if per_datum(&e) => {
                    report.skip(format!("N' = {np}, datum {i}"), &e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            for (j, (n, e)) in cells.into_iter().enumerate() {
                match e {
                    Ok(err) => {
                        detail.push(vec![np.into(), i.into(), radii[i].into(), n.into(), err.into()]);
                        worst[j] = worst[j].max(err);
                        used[j] += 1;
                    }
                    Err(e) if per_datum(&e) => report.skip(format!("N' = {np}, datum {i}, N = {n}"), &e),
                    Err(e) => return Err(e),
                }
            }
        }
        let mut below = Vec::new();
        for (j, &n) in ns.iter().enumerate() {
            summary.push(vec![
                np.into(),
                sigma.into(),
                n.into(),
                worst[j].into(),
                used[j].into(),
            ]);
            if n < 2.0 * grid.kmax() as f64 {
                below.push((n, worst[j]));
            }
        }
        below.sort_by(|a, b| a.0.total_cmp(&b.0));
        let errs: Vec<f64> = below.iter().map(|x| x.1).collect();
        if sigma > 0.0 && !strictly_decreasing(&errs) {
            failures.push(np);
        }
    }
    report.tables.push(summary);
    report.tables.push(detail);
    if cutoffs_below(&ns, grid.kmax()).len() >= 2 {
        report.add_check(
            "monotone",
            failures.is_empty(),
            format!("N' values whose max discrepancy is not strictly decreasing in N: {failures:?}"),
        );
    }
    report.snapshots.push(("center.kgsq".into(), center));
    Ok(finish(report, start))
}

/// `‖□u_lo + u_lo + P_{≤M}(u_lo³)‖_{H^{-1/2}}` for `u_lo = P_{≤N'}u` along a
/// full-flow trajectory, where `□u_lo + u_lo = -P_{≤N'}(u³)` exactly.
fn low_residual(u: &FourierField, n_prime: f64, m: f64) -> FourierField {
    let lo = u.apply_multiplier(smooth_multiplier(n_prime));
    let eq = cubic_power(u).apply_multiplier(smooth_multiplier(n_prime));
    let model = cubic_power(&lo).apply_multiplier(smooth_multiplier(m));
    model.sub(&eq)
}

/// Pairs agreeing on `|k| <= N*` and differing above, evolved by the full flow.
pub fn run_lowfreq_stability(cfg: &LoadedConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let grid = cfg.grid()?;
    let icfg = cfg.integrator()?;
    let horizon = cfg.horizon()?;
    let seeds = cfg.seeds()?.to_vec();
    let n_primes = cfg.sweep("n_prime")?;
    let mut n_stars = cfg.sweep("n_star")?;
    n_stars.sort_by(f64::total_cmp);
    let lf = cfg.config.lowfreq;
    if !(lf.perturbation >= 0.0) || !(lf.shell_width > 0.0) || !(lf.m > 0.0) || !(lf.data_cutoff >= 0.0) {
        return Err(cfg.error(
            "lowfreq",
            "",
            "need perturbation >= 0 and positive shell_width, m",
        ));
    }
    let max_np = n_primes.iter().copied().fold(0.0, f64::max);
    if n_stars[0] <= max_np {
        return Err(cfg.error("sweep", "n_star", format!("every N* must exceed N' = {max_np}")));
    }
    for &ns in &n_stars {
        let hit = grid.wavevectors().any(|(_, k)| {
            let r = (norm_sq(k) as f64).sqrt();
            r > ns && r <= ns + lf.shell_width
        });
        if !hit {
            return Err(cfg.error(
                "sweep",
                "n_star",
                format!(
                    "no lattice points of the kmax = {} box lie in the shell above N* = {ns}",
                    grid.kmax()
                ),
            ));
        }
    }
    let base = base_pair(cfg, grid)?;
    let times = uniform_times(horizon, cfg.config.flow.samples);

    struct Cellwise {
        diff: Vec<f64>,
        residual: Vec<f64>,
    }
    let run_seed = |seed: u64| -> Result<(PhasePoint, Vec<Cellwise>)> {
        let p = randomize(&base, RandomSeed(seed)).apply_multiplier(sharp_multiplier(lf.data_cutoff));
        let a = evolve(&p, horizon, &icfg, FlowKind::Full, &times)?;
        let mut out = Vec::new();
        for &ns in &n_stars {
            let b = if lf.perturbation > 0.0 {
                let outer = ns + lf.shell_width;
                let h = random_direction(grid, seed, PERTURB_STREAM, lf.perturbation, |k| {
                    let r = (norm_sq(k) as f64).sqrt();
                    r > ns && r <= outer
                })?;
                evolve(&p.add(&h), horizon, &icfg, FlowKind::Full, &times)?
            } else {
                a.clone()
            };
            let diff = n_primes
                .iter()
                .map(|&np| {
                    a.points
                        .iter()
                        .zip(&b.points)
                        .map(|(x, y)| x.sub(y).apply_multiplier(smooth_multiplier(np)).pair_norm(0.5))
                        .fold(0.0, f64::max)
                })
                .collect();
            let residual = n_primes
                .iter()
                .map(|&np| {
                    let vals: Vec<f64> = b
                        .points
                        .iter()
                        .map(|q| low_residual(&q.pos, np, lf.m).sobolev_norm(-0.5))
                        .collect();
                    vals.iter().sum::<f64>() / vals.len() as f64
                })
                .collect();
            out.push(Cellwise { diff, residual });
        }
        Ok((p, out))
    };
    let outcomes: Vec<Result<(PhasePoint, Vec<Cellwise>)>> = seeds.par_iter().map(|&s| run_seed(s)).collect();

    let mut report = ExperimentReport::new("lowfreq-stability", cfg);
    let mut table = Table::new(
        "lowfreq",
        &[
            "seed",
            "n_prime",
            "n_star",
            "low_diff",
            "residual",
            "fit_c",
            "fit_theta",
        ],
    );
    let mut monotone_fail = Vec::new();
    let mut theta_fail = Vec::new();
    let mut residual_fail = Vec::new();
    let mut fitted = 0;
    for (&seed, outcome) in seeds.iter().zip(outcomes) {
        let (p, cells) = match outcome {
            Ok(x) => x,
            Err(e) if per_datum(&e) => {
                report.skip(format!("seed {seed}"), &e);
                continue;
            }
            Err(e) => return Err(e),
        };
        report.snapshots.push((format!("data_seed{seed}.kgsq"), p));
        for (j, &np) in n_primes.iter().enumerate() {
            let diffs: Vec<f64> = cells.iter().map(|c| c.diff[j]).collect();
            if diffs.windows(2).any(|w| w[1] > w[0]) {
                monotone_fail.push((seed, np));
            }
            // (log(N*/N'))^{-θ} decay: log D = log c - θ log log(N*/N').
            let fit = if diffs.iter().all(|&d| d > 0.0) {
                let xs: Vec<f64> = n_stars.iter().map(|&s| (s / np).ln().ln()).collect();
                let ys: Vec<f64> = diffs.iter().map(|d| d.ln()).collect();
                linear_fit(&xs, &ys)
            } else {
                None
            };
            let (c, theta) = match fit {
                Some((a, b, rms)) => {
                    fitted += 1;
                    report.fits.push(Fit {
                        name: format!("theta[seed={seed},n_prime={np}]"),
                        value: -b,
                        residual: rms,
                        points: diffs.len(),
                    });
                    if !(-b > 0.0) {
                        theta_fail.push((seed, np, -b));
                    }
                    if rms > 0.3 {
                        residual_fail.push((seed, np, rms));
                    }
                    (a.exp(), -b)
                }
                None => (f64::NAN, f64::NAN),
            };
            for (i, &ns) in n_stars.iter().enumerate() {
                table.push(vec![
                    seed.into(),
                    np.into(),
                    ns.into(),
                    diffs[i].into(),
                    cells[i].residual[j].into(),
                    c.into(),
                    theta.into(),
                ]);
            }
        }
    }
    report.tables.push(table);
    report.add_check(
        "monotone",
        monotone_fail.is_empty(),
        format!("(seed, N') pairs increasing in N*: {monotone_fail:?}"),
    );
    if fitted > 0 {
        report.add_check(
            "theta_positive",
            theta_fail.is_empty(),
            format!("failures: {theta_fail:?}"),
        );
        report.add_check(
            "fit_residual",
            residual_fail.is_empty(),
            format!("fits with rms residual > 0.3: {residual_fail:?}"),
        );
    }
    Ok(finish(report, start))
}

/// `‖u_N‖_{L⁴_{t,x}} <= C ρ` for data of size `ρ` across the `N` sweep.
pub fn run_small_data(cfg: &LoadedConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let grid = cfg.grid()?;
    let icfg = cfg.integrator()?;
    let horizon = cfg.horizon()?;
    let seeds = cfg.seeds()?.to_vec();
    let ns = cfg.sweep("n")?;
    let mut rhos = cfg.sweep("rho")?;
    rhos.sort_by(|a, b| b.total_cmp(a));
    let tol = cfg.config.small_data.tolerance;
    let base = base_pair(cfg, grid)?;
    let times = uniform_times(horizon, cfg.config.flow.samples.max(1));

    let mut cells: Vec<(u64, f64, f64)> = Vec::new();
    for &s in &seeds {
        for &n in &ns {
            cells.extend(rhos.iter().map(|&r| (s, n, r)));
        }
    }
    let values: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(seed, n, rho)| {
            let p = randomize(&base, RandomSeed(seed));
            let size = p.pair_norm(0.5);
            if size == 0.0 {
                return Ok(0.0);
            }
            let traj = evolve(
                &p.scale(rho / size),
                horizon,
                &icfg,
                FlowKind::Truncated(n),
                &times,
            )?;
            if horizon == 0.0 {
                return Ok(0.0);
            }
            strichartz_norm(&SpaceTimeSamples::from_trajectory(&traj, None)?, 4.0, 4.0)
        })
        .collect();

    let mut report = ExperimentReport::new("small-data", cfg);
    let mut table = Table::new("small_data", &["seed", "n", "rho", "l4_norm", "ratio"]);
    let mut per_n = vec![0.0f64; ns.len()];
    let mut scaling = Vec::new();
    let mut prev: Option<(u64, f64, f64, f64)> = None;
    for (&(seed, n, rho), v) in cells.iter().zip(values) {
        let norm = match v {
            Ok(x) => x,
            Err(e) if per_datum(&e) => {
                report.skip(format!("seed {seed}, N = {n}, rho = {rho}"), &e);
                prev = None;
                continue;
            }
            Err(e) => return Err(e),
        };
        let ratio = norm / rho;
        table.push(vec![seed.into(), n.into(), rho.into(), norm.into(), ratio.into()]);
        let j = ns.iter().position(|&x| x == n).unwrap();
        per_n[j] = per_n[j].max(ratio);
        if let Some((ps, pn, prho, pnorm)) = prev {
            if ps == seed && pn == n && pnorm > 0.0 {
                scaling.push((norm / pnorm) / (rho / prho));
            }
        }
        prev = Some((seed, n, rho, norm));
    }
    report.tables.push(table);
    let c = per_n.iter().copied().fold(0.0, f64::max);
    let c_min = per_n.iter().copied().fold(f64::INFINITY, f64::min);
    report.fits.push(Fit {
        name: "C".into(),
        value: c,
        residual: if c > 0.0 { (c - c_min) / c } else { 0.0 },
        points: per_n.len(),
    });
    report.add_check(
        "constant_bound",
        c.is_finite(),
        format!("C = {c}; per-N constants {per_n:?}"),
    );
    if c > 0.0 {
        report.add_check(
            "stable_across_n",
            c <= (1.0 + tol) * c_min,
            format!("max/min per-N constant = {} (limit {})", c / c_min, 1.0 + tol),
        );
    }
    if !scaling.is_empty() {
        let worst = scaling.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
        report.add_check(
            "linear_scaling",
            worst <= 0.2,
            format!("norm ratio / rho ratio within {worst} of 1 (limit 0.2)"),
        );
    }
    Ok(finish(report, start))
}

fn tail_norm_value(p: &PhasePoint, p1: f64, p2: f64, horizon: f64, samples: usize) -> Result<f64> {
    let n = p.grid().n_phys();
    if horizon == 0.0 {
        return Ok(to_physical(&p.pos, n)?.lp_norm(p2));
    }
    let times = uniform_times(horizon, samples.max(1));
    let fields = times.iter().map(|&t| free_evolve(p, t).pos).collect();
    strichartz_norm(&SpaceTimeSamples::new(times, fields, None)?, p1, p2)
}

/// Tails of free-evolution norms of randomized data, plus growth of the
/// nonlinear component `w = u - S(t)p`.
pub fn run_tail_stats(cfg: &LoadedConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let ts = cfg.config.tails.clone();
    if ts.ensemble < 2 || ts.lambda_points < 2 || ts.norms.is_empty() {
        return Err(cfg.error(
            "tails",
            "",
            "need ensemble >= 2, lambda_points >= 2 and at least one norm",
        ));
    }
    let base = match ts.base {
        TailBase::SingleMode => {
            let reach = ts
                .mode
                .iter()
                .map(|c| c.unsigned_abs() as usize)
                .max()
                .unwrap_or(0)
                .max(1);
            let g = SpectralGrid::new(reach).map_err(|e| cfg.error("tails", "mode", e))?;
            let w = bracket(ts.mode);
            let f0 = FourierField::single_mode(g, ts.mode, Complex64::new(1.0, 0.0))
                .map_err(|e| cfg.error("tails", "mode", e))?;
            let f1 = f0.scale(w);
            BasePair::new(f0, f1)?
        }
        TailBase::PowerLaw => base_pair(cfg, cfg.grid()?)?,
    };
    let samples = cfg.config.flow.samples;
    let seeds: Vec<u64> = (0..ts.ensemble as u64).map(|i| ts.first_seed + i).collect();

    let mut report = ExperimentReport::new("tails", cfg);
    let mut table = Table::new(
        "tails",
        &[
            "norm",
            "p1",
            "p2",
            "horizon",
            "lambda",
            "empirical_tail",
            "fit_c",
            "fit_theta",
        ],
    );
    for (idx, tn) in ts.norms.iter().enumerate() {
        if !(tn.p2 >= 1.0) || !(tn.horizon >= 0.0) || (tn.horizon > 0.0 && !(tn.p1 >= 1.0)) {
            return Err(cfg.error("tails", "norms", format!("invalid norm {tn:?}")));
        }
        let values: Vec<f64> = seeds
            .par_iter()
            .map(|&s| {
                tail_norm_value(
                    &randomize(&base, RandomSeed(s)),
                    tn.p1,
                    tn.p2,
                    tn.horizon,
                    samples,
                )
            })
            .collect::<Result<_>>()?;
        let hi = 1.0 - 10.0 / ts.ensemble as f64;
        let grid = quantile_grid(&values, 0.1, hi.max(0.5), ts.lambda_points);
        let tail = tail_statistics(&values, &grid)?;
        let label = format!("theta[p1={},p2={},T={}]", tn.p1, tn.p2, tn.horizon);
        let (c, theta) = tail.fit.map(|f| (f.c, f.theta)).unwrap_or((f64::NAN, f64::NAN));
        if let Some(f) = tail.fit {
            report.fits.push(Fit {
                name: label.clone(),
                value: f.theta,
                residual: f.residual,
                points: f.points,
            });
        }
        for (lam, pt) in tail.lambda_grid.iter().zip(&tail.empirical_tail) {
            table.push(vec![
                idx.into(),
                tn.p1.into(),
                tn.p2.into(),
                tn.horizon.into(),
                (*lam).into(),
                (*pt).into(),
                c.into(),
                theta.into(),
            ]);
        }
        if idx == 0 {
            if values.iter().all(|&v| v == 0.0) {
                report.add_check("theta_window", true, "all norms vanish (zero base)");
            } else {
                let ok = (theta - ts.theta_target).abs() <= ts.theta_tolerance;
                report.add_check(
                    "theta_window",
                    ok,
                    format!(
                        "{label} = {theta} (target {} ± {})",
                        ts.theta_target, ts.theta_tolerance
                    ),
                );
            }
        }
    }
    report.tables.push(table);

    if ts.growth_seeds > 0 {
        let grid = cfg.grid()?;
        let icfg = cfg.integrator()?;
        let gbase = BasePair::new(base.f0.resample(grid), base.f1.resample(grid))?;
        let kind = ts.growth_truncation.map_or(FlowKind::Full, FlowKind::Truncated);
        kind.validate()
            .map_err(|e| cfg.error("tails", "growth_truncation", e))?;
        let times = uniform_times(ts.growth_horizon, ts.growth_samples);
        let runs: Vec<Result<Vec<f64>>> = seeds[..ts.growth_seeds.min(seeds.len())]
            .par_iter()
            .map(|&s| {
                let p = randomize(&gbase, RandomSeed(s));
                let traj = evolve(&p, ts.growth_horizon, &icfg, kind, &times)?;
                Ok(traj
                    .points
                    .iter()
                    .zip(&traj.times)
                    .map(|(u, &t)| u.sub(&free_evolve(&p, t)).pair_norm(1.0))
                    .collect())
            })
            .collect();
        let mut growth = Table::new(
            "tail_growth",
            &["seed", "time", "w_h1", "fit_exponent", "fit_residual"],
        );
        let mut too_fast = Vec::new();
        for (&s, run) in seeds.iter().zip(runs) {
            let w = match run {
                Ok(w) => w,
                Err(e) if per_datum(&e) => {
                    report.skip(format!("growth seed {s}"), &e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let (xs, ys): (Vec<f64>, Vec<f64>) = times
                .iter()
                .zip(&w)
                .filter(|(&t, &v)| t > 0.0 && v > 0.0)
                .map(|(&t, &v)| ((ts.growth_lambda + t).ln(), v.ln()))
                .unzip();
            let (exponent, residual) = linear_fit(&xs, &ys).map_or((f64::NAN, f64::NAN), |f| (f.1, f.2));
            report.fits.push(Fit {
                name: format!("growth[seed={s}]"),
                value: exponent,
                residual,
                points: xs.len(),
            });
            if !(exponent <= 2.0) {
                too_fast.push((s, exponent));
            }
            for (&t, &v) in times.iter().zip(&w) {
                growth.push(vec![
                    s.into(),
                    t.into(),
                    v.into(),
                    exponent.into(),
                    residual.into(),
                ]);
            }
        }
        report.tables.push(growth);
        report.add_check(
            "growth_degree",
            too_fast.is_empty(),
            format!("seeds with fitted exponent above 2 or undefined: {too_fast:?}"),
        );
    }
    Ok(finish(report, start))
}

/// `bilinear_measure` over seeded shell data for each `M <= N`.
pub fn run_bilinear_scan(cfg: &LoadedConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let horizon = cfg.horizon()?;
    if !(horizon > 0.0) {
        return Err(cfg.error("flow", "horizon", "the bilinear scan needs T > 0"));
    }
    let seeds = cfg.seeds()?.to_vec();
    let ms = cfg.sweep("m")?;
    let mut ns = cfg.sweep("n")?;
    ns.sort_by(f64::total_cmp);
    let d = &cfg.config.data;
    let shell_grid = |m: f64| SpectralGrid::new((m.ceil() as usize).max(1));
    let mut cells: Vec<(u64, f64, f64)> = Vec::new();
    for &s in &seeds {
        for &m in &ms {
            cells.extend(ns.iter().filter(|&&n| m <= n).map(|&n| (s, m, n)));
        }
    }
    let reports: Vec<Result<crate::norms::BilinearReport>> = cells
        .par_iter()
        .map(|&(seed, m, n)| {
            let phi = randomize(
                &BasePair::power_law(shell_grid(m)?, d.amplitude, d.decay),
                RandomSeed(2 * seed),
            );
            let psi = randomize(
                &BasePair::power_law(shell_grid(n)?, d.amplitude, d.decay),
                RandomSeed(2 * seed + 1),
            );
            let o = if is_separated(m, n) { n } else { m };
            bilinear_measure(&phi.pos, m, &psi.pos, n, o, horizon, (Sign::Plus, Sign::Plus))
        })
        .collect();

    let mut report = ExperimentReport::new("bilinear", cfg);
    let mut table = Table::new(
        "bilinear",
        &[
            "seed",
            "m",
            "n",
            "o",
            "t",
            "separated",
            "measured",
            "bound_sep",
            "bound_par",
            "ratio",
        ],
    );
    let mut sep_max = vec![0.0f64; ns.len()];
    let mut c_scan = 0.0f64;
    for (&(seed, _, _), r) in cells.iter().zip(reports) {
        let r = r?;
        table.push(vec![
            seed.into(),
            r.m.into(),
            r.n.into(),
            r.o.into(),
            r.t.into(),
            (r.separated as usize).into(),
            r.measured.into(),
            r.bound_sep.into(),
            r.bound_par.into(),
            r.ratio.into(),
        ]);
        c_scan = c_scan.max(r.ratio);
        if r.separated {
            let j = ns.iter().position(|&x| x == r.n).unwrap();
            sep_max[j] = sep_max[j].max(r.ratio);
        }
    }
    report.tables.push(table);
    report.fits.push(Fit {
        name: "C_scan".into(),
        value: c_scan,
        residual: 0.0,
        points: cells.len(),
    });
    report.add_check("finite", c_scan.is_finite(), format!("C_scan = {c_scan}"));
    let factor = cfg.config.bilinear.max_factor;
    if sep_max.iter().filter(|&&r| r > 0.0).count() >= 2 {
        let worst = sep_max
            .windows(2)
            .filter(|w| w[0] > 0.0 && w[1] > 0.0)
            .map(|w| (w[1] / w[0]).max(w[0] / w[1]))
            .fold(1.0, f64::max);
        report.add_check(
            "separated_scaling",
            worst <= factor,
            format!(
                "max separated ratio per N {sep_max:?}; worst consecutive factor {worst} (limit {factor})"
            ),
        );
    }
    Ok(finish(report, start))
}

pub fn run_witness(cfg: &LoadedConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let grid = cfg.grid()?;
    let icfg = cfg.integrator()?;
    let horizon = cfg.horizon()?;
    let seed = cfg.seeds()?[0];
    let w = cfg.config.witness;
    w.kind.validate().map_err(|e| cfg.error("witness", "kind", e))?;
    let center = randomize(&base_pair(cfg, grid)?, RandomSeed(seed));
    let ball = BallSpec::new(center.clone(), w.radius).map_err(|e| cfg.error("witness", "radius", e))?;
    let cyl = CylinderSpec::new(
        w.k0,
        Complex64::new(w.z0[0], w.z0[1]),
        Complex64::new(w.z1[0], w.z1[1]),
        w.r,
    )
    .map_err(|e| cfg.error("witness", "r", e))?;
    let opt = WitnessOptions {
        step: w.step,
        max_iters: w.max_iters,
        tol: w.tol,
    };
    let res = witness_search(&ball, &cyl, horizon, w.kind, &icfg, &opt).map_err(|e| match e {
        Error::InvalidArgument(m) => cfg.error("witness", "", m),
        other => other,
    })?;
    let mut report = ExperimentReport::new("witness", cfg);
    let mut table = Table::new("witness_trace", &["iter", "g", "grad_norm", "step"]);
    for row in &res.trace {
        table.push(vec![
            row.iter.into(),
            row.g.into(),
            row.grad_norm.into(),
            row.step.into(),
        ]);
    }
    report.tables.push(table);
    report.fits.push(Fit {
        name: "functional_value".into(),
        value: res.functional_value,
        residual: 0.0,
        points: res.iterations,
    });
    report.add_check(
        "escaped",
        res.converged && res.functional_value > w.r,
        format!(
            "G = {} vs r = {} after {} iterations (converged = {})",
            res.functional_value, w.r, res.iterations, res.converged
        ),
    );
    report.json.push((
        "witness.json".into(),
        serde_json::json!({
            "functional_value": res.functional_value,
            "iterations": res.iterations,
            "converged": res.converged,
            "escaped": res.escaped,
            "witness": "witness.kgsq",
            "center": "center.kgsq",
            "ball_radius": w.radius,
            "cylinder": { "k0": w.k0, "z0": w.z0, "z1": w.z1, "r": w.r },
            "horizon": horizon,
            "trace": "witness_trace.csv",
        }),
    ));
    report.snapshots.push(("center.kgsq".into(), center));
    report.snapshots.push(("witness.kgsq".into(), res.witness));
    Ok(finish(report, start))
}

fn conserved_energy(kind: FlowKind) -> EnergyKind {
    match kind {
        FlowKind::Free => EnergyKind::Free,
        FlowKind::Full => EnergyKind::Full,
        FlowKind::Truncated(n) => EnergyKind::TruncatedPair { n, k: 2.0 * n },
    }
}

/// Trajectories of the seeded data with an index of exported snapshots.
pub fn run_evolve(cfg: &LoadedConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let grid = cfg.grid()?;
    let icfg = cfg.integrator()?;
    let horizon = cfg.horizon()?;
    let seeds = cfg.seeds()?.to_vec();
    let ev = cfg.config.evolve;
    ev.kind.validate().map_err(|e| cfg.error("evolve", "kind", e))?;
    let base = base_pair(cfg, grid)?;
    let times = uniform_times(horizon, cfg.config.flow.samples);
    let runs: Vec<Result<Trajectory>> = seeds
        .par_iter()
        .map(|&s| evolve(&randomize(&base, RandomSeed(s)), horizon, &icfg, ev.kind, &times))
        .collect();
    let mut report = ExperimentReport::new("evolve", cfg);
    let mut table = Table::new(
        "trajectory",
        &["seed", "index", "time", "energy", "pair_norm_half", "snapshot"],
    );
    let ekind = conserved_energy(ev.kind);
    let mut drift = 0.0f64;
    for (&s, run) in seeds.iter().zip(runs) {
        let traj = match run {
            Ok(t) => t,
            Err(e) if per_datum(&e) => {
                report.skip(format!("seed {s}"), &e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let e0 = energy(&traj.points[0], ekind)?;
        for (i, (t, p)) in traj.times.iter().zip(&traj.points).enumerate() {
            let e = energy(p, ekind)?;
            drift = drift.max((e - e0).abs());
            let name = if ev.snapshots {
                let name = format!("traj_seed{s}_{i:04}.kgsq");
                report.snapshots.push((name.clone(), p.clone()));
                name
            } else {
                String::new()
            };
            table.push(vec![
                s.into(),
                i.into(),
                (*t).into(),
                e.into(),
                p.pair_norm(0.5).into(),
                name.into(),
            ]);
        }
    }
    report.tables.push(table);
    report.fits.push(Fit {
        name: "energy_drift".into(),
        value: drift,
        residual: 0.0,
        points: seeds.len(),
    });
    Ok(finish(report, start))
}

/// Seeded ensemble snapshots and their basic norms.
pub fn run_randomize(cfg: &LoadedConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let grid = cfg.grid()?;
    let seeds = cfg.seeds()?.to_vec();
    let base = base_pair(cfg, grid)?;
    let rows: Vec<Result<(PhasePoint, f64)>> = seeds
        .par_iter()
        .map(|&s| {
            let p = randomize(&base, RandomSeed(s));
            let l4 = to_physical(&p.pos, grid.n_phys())?.lp_norm(4.0);
            Ok((p, l4))
        })
        .collect();
    let mut report = ExperimentReport::new("randomize", cfg);
    let mut table = Table::new(
        "ensemble",
        &["seed", "pair_norm_half", "pair_norm_one", "l4_x", "snapshot"],
    );
    for (&s, row) in seeds.iter().zip(rows) {
        let (p, l4) = row?;
        let name = format!("data_seed{s}.kgsq");
        table.push(vec![
            s.into(),
            p.pair_norm(0.5).into(),
            p.pair_norm(1.0).into(),
            l4.into(),
            name.clone().into(),
        ]);
        report.snapshots.push((name, p));
    }
    report.tables.push(table);
    Ok(finish(report, start))
}

/// Space-time norms of seeded trajectories.
pub fn run_norms(cfg: &LoadedConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let grid = cfg.grid()?;
    let icfg = cfg.integrator()?;
    let horizon = cfg.horizon()?;
    if !(horizon > 0.0) {
        return Err(cfg.error("flow", "horizon", "norms need T > 0"));
    }
    let seeds = cfg.seeds()?.to_vec();
    let nc = cfg.config.norms.clone();
    nc.kind.validate().map_err(|e| cfg.error("norms", "kind", e))?;
    let base = base_pair(cfg, grid)?;
    let times = uniform_times(horizon, cfg.config.flow.samples.max(1));
    let rows: Vec<Result<[f64; 7]>> = seeds
        .par_iter()
        .map(|&s| {
            let traj = evolve(&randomize(&base, RandomSeed(s)), horizon, &icfg, nc.kind, &times)?;
            let samples = SpaceTimeSamples::from_trajectory(&traj, Some(Window::Bump))?;
            let fields: Vec<FourierField> = traj.points.iter().map(|p| p.pos.clone()).collect();
            let monitor = l4_monitor(&samples, nc.l4_threshold)?;
            Ok([
                strichartz_norm(&samples, nc.q, nc.r)?,
                z_norm(&samples)?,
                xsb_norm(&samples, nc.s, nc.b)?,
                vp_norm_fields(&fields, nc.s, nc.p, false)?,
                *monitor.running.last().unwrap_or(&0.0),
                monitor.crossing.unwrap_or(f64::NAN),
                traj.points.last().map_or(0.0, |p| p.pair_norm(0.5)),
            ])
        })
        .collect();
    let mut report = ExperimentReport::new("norms", cfg);
    let mut table = Table::new("norms", &["seed", "norm", "s", "b", "p", "q", "r", "value"]);
    let blank = || Cell::from("");
    let specs: [(&str, [Cell; 5]); 7] = [
        (
            "strichartz",
            [blank(), blank(), blank(), nc.q.into(), nc.r.into()],
        ),
        ("z", [blank(), blank(), blank(), blank(), blank()]),
        ("xsb", [nc.s.into(), nc.b.into(), blank(), blank(), blank()]),
        ("vp", [nc.s.into(), blank(), nc.p.into(), blank(), blank()]),
        ("l4_total", [blank(), blank(), blank(), 4.0.into(), 4.0.into()]),
        (
            "l4_crossing_time",
            [blank(), blank(), blank(), 4.0.into(), 4.0.into()],
        ),
        (
            "final_pair_norm",
            [0.5.into(), blank(), blank(), blank(), blank()],
        ),
    ];
    for (&s, row) in seeds.iter().zip(rows) {
        match row {
            Ok(v) => {
                for ((name, params), &x) in specs.iter().zip(&v) {
                    let mut cells: Vec<Cell> = vec![s.into(), (*name).into()];
                    cells.extend(params.iter().cloned());
                    cells.push(x.into());
                    table.push(cells);
                }
            }
            Err(e) if per_datum(&e) => report.skip(format!("seed {s}"), &e),
            Err(e) => return Err(e),
        }
    }
    report.tables.push(table);
    Ok(finish(report, start))
}
