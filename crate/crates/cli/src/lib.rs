//! Configuration, orchestration and result files for the `fallgas` tool.

pub mod catalog;
pub mod config;
pub mod experiments;
pub mod outcome;
pub mod output;

use std::path::{Path, PathBuf};

use anyhow::Result;

pub use catalog::{list_experiments, CatalogEntry, Scale};
pub use config::ExperimentConfig;
pub use experiments::{run_experiment, validate, RunResult};
pub use outcome::{Outcome, Verdict};

/// Runs `cfg` and writes its files. Partial results are written and flagged
/// when a worker fails.
pub fn run(cfg: &ExperimentConfig, output: Option<&Path>) -> Result<(RunResult, PathBuf)> {
    let r = run_experiment(cfg)?;
    let dir = output::resolve_dir(cfg, output);
    output::write_run(cfg, &r, &dir)?;
    Ok((r, dir))
}
