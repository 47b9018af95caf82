//! Seeded benchmark experiments: config parsing, chain runs, and the
//! artifact tree (chains, reports, plots, summary).

pub mod config;
pub mod output;
pub mod plot;
pub mod run;

pub use config::{load_config, parse_config, ExperimentConfig, KernelRun, TargetSpec};
pub use output::{emit_chain_csv, read_chain_csv};
pub use run::{run_dir, run_experiment, ExperimentOutcome, RunOutcome};
