//! `kgsq` command line.

use super::config::LoadedConfig;
use super::drivers;
use super::report::ExperimentReport;
use crate::error::{Error, Result};
use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "kgsq",
    version,
    about = "Cubic Klein-Gordon on T³: flows, norms, randomization and non-squeezing experiments",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Overrides `experiment.output_dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Only print the final verdict.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve seeded data and export snapshots.
    Evolve(RunArgs),
    /// Write a seeded ensemble of randomized data.
    Randomize(RunArgs),
    /// Full vs truncated flow error over an N sweep.
    Converge(RunArgs),
    /// Worst-case truncation error over a ball of data.
    LocalUniform(RunArgs),
    /// Low-frequency response to high-frequency perturbations.
    LowfreqStability(RunArgs),
    /// L⁴ bounds for small data.
    SmallData(RunArgs),
    /// Tail statistics of randomized data.
    Tails(RunArgs),
    /// Bilinear Strichartz scan over dyadic shells.
    Bilinear(RunArgs),
    /// Non-squeezing witness search.
    Witness(RunArgs),
    /// Space-time norms of trajectories.
    Norms(RunArgs),
}

type Driver = fn(&LoadedConfig) -> Result<ExperimentReport>;

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var("KGSQ_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("KGSQ_THREADS must be a positive integer, got {raw:?}"))?;
    // A pool that already exists (repeated calls in one process) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs the command line and returns the process exit status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    let (args, driver): (RunArgs, Driver) = match cli.command {
        Command::Evolve(a) => (a, drivers::run_evolve),
        Command::Randomize(a) => (a, drivers::run_randomize),
        Command::Converge(a) => (a, drivers::run_convergence),
        Command::LocalUniform(a) => (a, drivers::run_local_uniform),
        Command::LowfreqStability(a) => (a, drivers::run_lowfreq_stability),
        Command::SmallData(a) => (a, drivers::run_small_data),
        Command::Tails(a) => (a, drivers::run_tail_stats),
        Command::Bilinear(a) => (a, drivers::run_bilinear_scan),
        Command::Witness(a) => (a, drivers::run_witness),
        Command::Norms(a) => (a, drivers::run_norms),
    };
    match run(&args, driver) {
        Ok(code) => code,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAIL
        }
    }
}

fn run(args: &RunArgs, driver: Driver) -> Result<i32> {
    let mut cfg = LoadedConfig::load(&args.config)?;
    if let Some(dir) = &args.output_dir {
        cfg.config.experiment.output_dir = dir.clone();
    }
    let dir = cfg.output_dir()?;
    let report = driver(&cfg)?;
    report.write(&dir, &cfg)?;
    if !args.quiet {
        for c in &report.checks {
            println!(
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        for f in &report.fits {
            println!(
                "fit {} = {} (residual {}, {} points)",
                f.name, f.value, f.residual, f.points
            );
        }
        for s in &report.skipped {
            println!("skipped {}: {}", s.context, s.error);
        }
    }
    let passed = report.passed();
    println!(
        "{} {} -> {} ({:.1} s)",
        report.driver,
        if passed { "passed" } else { "FAILED" },
        dir.display(),
        report.wall_clock_s
    );
    Ok(if passed { EXIT_PASS } else { EXIT_FAIL })
}
