//! Configuration, experiment drivers, persistence and the command line.

pub mod cli;
pub mod config;
pub mod drivers;
pub mod report;

pub use config::{ExperimentConfig, LoadedConfig};
pub use drivers::{
    run_bilinear_scan, run_convergence, run_evolve, run_local_uniform, run_lowfreq_stability, run_norms,
    run_randomize, run_small_data, run_tail_stats, run_witness,
};
pub use report::{Cell, Check, ExperimentReport, Fit, Manifest, Table};
