//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`) so the verdict lines are always
//! printed by `cargo test`.

use kgsq::flow::{evolve, tangent_evolve, uniform_times, FlowKind, IntegratorConfig, TangentPair};
use kgsq::harness::{
    run_bilinear_scan, run_convergence, run_lowfreq_stability, run_small_data, run_tail_stats,
    ExperimentReport, LoadedConfig,
};
use kgsq::norms::vp_norm;
use kgsq::random::{randomize, BasePair, RandomSeed};
use kgsq::spectral::{PhasePoint, SpectralGrid};
use kgsq::symplectic::{
    cylinder_functional, energy, omega, witness_search, BallSpec, CylinderSpec, EnergyKind, WitnessOptions,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn seeded_point(kmax: usize, amplitude: f64, decay: f64, seed: u64) -> PhasePoint {
    let grid = SpectralGrid::new(kmax).unwrap();
    randomize(&BasePair::power_law(grid, amplitude, decay), RandomSeed(seed))
}

fn config(body: &str) -> LoadedConfig {
    let dir = std::env::temp_dir().join("kgsq-acceptance");
    let text = format!(
        "[experiment]\nid = \"acceptance\"\noutput_dir = {:?}\n\n{body}",
        dir.display().to_string()
    );
    LoadedConfig::parse(&text, "acceptance.toml").unwrap()
}

fn checks(r: &ExperimentReport) -> String {
    r.checks
        .iter()
        .map(|c| {
            format!(
                "[{} {}: {}]",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.detail
            )
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn symplectic_exactness() -> Verdict {
    let cfg = IntegratorConfig::with_dt(1e-3);
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let base = seeded_point(6, 0.5, 1.5, 100 + seed);
        let a = seeded_point(6, 1.0, 1.0, 200 + seed);
        let b = seeded_point(6, 1.0, 1.0, 300 + seed);
        let tp = TangentPair::new(base, a, b).unwrap();
        let w0 = omega(&tp.delta_a, &tp.delta_b).unwrap();
        for kind in [FlowKind::Full, FlowKind::Truncated(8.0)] {
            let out = tangent_evolve(&tp, 1.0, &cfg, kind).unwrap();
            let w1 = omega(&out.delta_a, &out.delta_b).unwrap();
            worst = worst.max((w1 - w0).abs() / w0.abs().max(1.0));
        }
    }
    verdict(
        worst <= 1e-10,
        format!("max |Δω| / max(1, |ω₀|) = {worst:.2e} (limit 1e-10)"),
    )
}

/// `max_t |H(t) - H(0)|` over the sample grid shared by all step sizes.
fn energy_drift(p: &PhasePoint, kind: FlowKind, ekind: EnergyKind, dt: f64) -> f64 {
    let times = uniform_times(1.0, 25);
    let traj = evolve(p, 1.0, &IntegratorConfig::with_dt(dt), kind, &times).unwrap();
    let h0 = energy(p, ekind).unwrap();
    traj.points
        .iter()
        .map(|q| (energy(q, ekind).unwrap() - h0).abs())
        .fold(0.0, f64::max)
}

fn energy_order() -> Verdict {
    let p = seeded_point(8, 1.0, 1.5, 11);
    let mut ok = true;
    let mut parts = Vec::new();
    for (kind, ekind, label) in [
        (FlowKind::Full, EnergyKind::Full, "full"),
        (
            FlowKind::Truncated(4.0),
            EnergyKind::TruncatedPair { n: 4.0, k: 8.0 },
            "truncated(4)",
        ),
    ] {
        let d: Vec<f64> = [4e-3, 2e-3, 1e-3]
            .iter()
            .map(|&dt| energy_drift(&p, kind, ekind, dt))
            .collect();
        let r = [d[0] / d[1], d[1] / d[2]];
        ok &= r.iter().all(|x| (3.2..=4.8).contains(x));
        parts.push(format!(
            "{label}: drifts {:.2e}/{:.2e}/{:.2e}, ratios {:.3}, {:.3}",
            d[0], d[1], d[2], r[0], r[1]
        ));
    }
    verdict(ok, format!("{} (window 4 ± 20%)", parts.join("; ")))
}

fn projector_identity() -> Verdict {
    let cfg = config(
        "[grid]\nkmax = 32\n\n[flow]\ndt = 0.01\nhorizon = 0.2\nsamples = 4\n\n[data]\namplitude = 0.2\ndecay = 2.0\nseeds = [1, 2, 3, 4, 5]\n\n[sweep]\nn = [2.0, 4.0, 8.0, 16.0, 64.0]\n",
    );
    let r = run_convergence(&cfg).unwrap();
    let rows = r.table("convergence").unwrap().rows.len();
    let ok = r.passed()
        && r.check("exactness").is_some()
        && r.check("monotone").is_some()
        && r.skipped.is_empty()
        && rows == 25;
    verdict(ok, format!("{rows} rows; {}", checks(&r)))
}

fn lowfreq_stability() -> Verdict {
    let cfg = config(
        "[grid]\nkmax = 40\n\n[flow]\ndt = 0.01\nhorizon = 0.5\nsamples = 5\n\n[data]\namplitude = 1.0\ndecay = 1.0\nseeds = [1]\n\n[sweep]\nn_prime = [2.0]\nn_star = [8.0, 16.0, 32.0, 64.0]\n\n[lowfreq]\nperturbation = 0.5\n",
    );
    let r = run_lowfreq_stability(&cfg).unwrap();
    let fit = r.fits.first();
    let diffs = r.table("lowfreq").unwrap().floats("low_diff");
    let ok = r.passed() && fit.is_some() && r.check("theta_positive").is_some();
    verdict(
        ok,
        format!(
            "low diffs {:?}; θ = {:.3}, residual {:.3}; {}",
            diffs.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>(),
            fit.map_or(f64::NAN, |f| f.value),
            fit.map_or(f64::NAN, |f| f.residual),
            checks(&r)
        ),
    )
}

/// Independent oracle: maximize over every subset of sample indices.
fn vp_enumerate(points: &[Vec<f64>], p: f64) -> f64 {
    let m = points.len();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << m) {
        let idx: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let s: f64 = idx
            .windows(2)
            .map(|w| dist(&points[w[0]], &points[w[1]]).powf(p))
            .sum();
        best = best.max(s);
    }
    best.powf(1.0 / p)
}

fn vp_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(2..=12);
        let dim = rng.random_range(1..=3);
        let points: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let dp = vp_norm(&points, 2.0, false).unwrap();
        worst = worst.max((dp - vp_enumerate(&points, 2.0)).abs());
    }
    verdict(
        worst <= 1e-12,
        format!("max |DP - enumeration| = {worst:.2e} over 100 sets (limit 1e-12)"),
    )
}

fn bilinear_scaling() -> Verdict {
    let seeds: Vec<String> = (1..=20).map(|s| s.to_string()).collect();
    let cfg = config(&format!(
        "[grid]\nkmax = 4\n\n[flow]\nhorizon = 1.0\n\n[data]\namplitude = 1.0\ndecay = 1.0\nseeds = [{}]\n\n[sweep]\nm = [1.0, 2.0, 4.0]\nn = [16.0, 32.0]\n",
        seeds.join(", ")
    ));
    let r = run_bilinear_scan(&cfg).unwrap();
    let ok = r.passed() && r.check("separated_scaling").is_some();
    verdict(ok, checks(&r))
}

fn gaussian_tails() -> Verdict {
    let cfg = config("[grid]\nkmax = 1\n\n[tails]\nensemble = 10000\nbase = \"single_mode\"\nmode = [1, 0, 0]\ntheta_target = 2.0\ntheta_tolerance = 0.3\n");
    let r = run_tail_stats(&cfg).unwrap();
    let fit = r.fits.first();
    verdict(
        r.passed() && fit.is_some(),
        format!(
            "θ = {:.4} (residual {:.4}); {}",
            fit.map_or(f64::NAN, |f| f.value),
            fit.map_or(f64::NAN, |f| f.residual),
            checks(&r)
        ),
    )
}

fn small_data() -> Verdict {
    let cfg = config(
        "[grid]\nkmax = 16\n\n[flow]\ndt = 0.01\nhorizon = 1.0\nsamples = 20\n\n[data]\namplitude = 1.0\ndecay = 2.0\nseeds = [1]\n\n[sweep]\nn = [4.0, 8.0, 16.0]\nrho = [1e-2, 5e-3, 2.5e-3]\n\n[small_data]\ntolerance = 0.25\n",
    );
    let r = run_small_data(&cfg).unwrap();
    let ok = r.passed() && r.check("stable_across_n").is_some();
    verdict(ok, checks(&r))
}

fn nonsqueezing_witness() -> Verdict {
    let cfg = IntegratorConfig::with_dt(0.01);
    let center = seeded_point(8, 0.5, 2.0, 7);
    let ball = BallSpec::new(center, 1.0).unwrap();
    let k0 = [1, 0, 0];
    let kind = FlowKind::Truncated(4.0);
    let opt = WitnessOptions {
        max_iters: 200,
        ..WitnessOptions::default()
    };
    let zero = Complex64::default();
    let cyl = CylinderSpec::new(k0, zero, zero, 0.5).unwrap();
    let res = witness_search(&ball, &cyl, 0.5, kind, &cfg, &opt).unwrap();
    // Harder variant: the cylinder axis passes through the image of the
    // starting point, so the search has to climb from G = 0.
    let start = ball.center.axpy(
        1.0,
        &kgsq::symplectic::mode_directions(ball.center.grid(), k0).unwrap()[0],
    );
    let image = evolve(&start, 0.5, &cfg, kind, &[]).unwrap().last().clone();
    let axis = CylinderSpec::new(k0, image.pos.coeff(k0), image.vel.coeff(k0), 0.5).unwrap();
    let climb = witness_search(&ball, &axis, 0.5, kind, &cfg, &opt).unwrap();
    let inside = ball.distance(&climb.witness) <= 1.0 + 1e-9;
    let recheck = evolve(&climb.witness, 0.5, &cfg, kind, &[]).unwrap();
    let g = cylinder_functional(recheck.last(), &axis).unwrap();
    let ok = res.converged
        && res.functional_value > 0.5
        && res.iterations <= 200
        && climb.converged
        && climb.functional_value > 0.5
        && climb.iterations <= 200
        && inside
        && (g - climb.functional_value).abs() < 1e-12;
    verdict(
        ok,
        format!(
            "z = 0: G = {:.4} after {} iterations; axis through image: G {:.1e} -> {:.4} after {} iterations, witness in ball = {inside}",
            res.functional_value,
            res.iterations,
            climb.trace[0].g,
            climb.functional_value,
            climb.iterations
        ),
    )
}

fn tangent_correctness() -> Verdict {
    let cfg = IntegratorConfig::with_dt(0.01);
    let mut ratios = Vec::new();
    for seed in 0..5u64 {
        let base = seeded_point(6, 0.5, 1.5, 400 + seed);
        let delta = seeded_point(6, 1.0, 1.5, 500 + seed);
        let tp = TangentPair::new(base.clone(), delta.clone(), PhasePoint::zeros(base.grid())).unwrap();
        let lin = tangent_evolve(&tp, 0.5, &cfg, FlowKind::Full).unwrap().delta_a;
        let err = |eps: f64| {
            let plus = evolve(&base.axpy(eps, &delta), 0.5, &cfg, FlowKind::Full, &[]).unwrap();
            let minus = evolve(&base.axpy(-eps, &delta), 0.5, &cfg, FlowKind::Full, &[]).unwrap();
            let fd = plus.last().sub(minus.last()).scale(0.5 / eps);
            fd.sub(&lin).pair_norm(0.5)
        };
        ratios.push(err(2e-3) / err(1e-3));
    }
    let ok = ratios.iter().all(|r| (3.0..=5.0).contains(r));
    verdict(
        ok,
        format!(
            "error(2e-3) / error(1e-3) = {:?} (window [3, 5])",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 10] = [
        ("symplectic exactness", symplectic_exactness),
        ("energy conservation order", energy_order),
        ("projector identity and convergence", projector_identity),
        ("low-frequency stability", lowfreq_stability),
        ("V^2 oracle equivalence", vp_oracle),
        ("bilinear scaling", bilinear_scaling),
        ("gaussian tails", gaussian_tails),
        ("small data", small_data),
        ("non-squeezing witness", nonsqueezing_witness),
        ("tangent flow correctness", tangent_correctness),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let v = run();
        if !v.passed {
            failed += 1;
        }
        println!(
            "{} {name} ({:.1} s): {}",
            if v.passed { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
