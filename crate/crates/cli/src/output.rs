//! Writes a run to its output directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};
use crate::experiments::RunResult;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    code_version: &'static str,
    name: &'a str,
    kind: &'static str,
    seed: u64,
    threads: usize,
    config: &'a ExperimentConfig,
    partial: bool,
    error: Option<&'a str>,
    passed: bool,
    files: Vec<String>,
}

/// Output directory: explicit override, then the config's, then `runs/<name>`.
pub fn resolve_dir(cfg: &ExperimentConfig, over: Option<&Path>) -> PathBuf {
    over.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name))
}

pub fn ladder_file(label: &str) -> String {
    let safe: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '=') { c } else { '_' })
        .collect();
    format!("ladder_{safe}.csv")
}

fn is_verification(e: &Experiment) -> bool {
    !matches!(e, Experiment::Simulate(_))
}

/// Writes data files, ladders, verdicts and diagnostics, then the manifest.
/// Returns the list of files written.
pub fn write_run(cfg: &ExperimentConfig, run: &RunResult, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    let mut put = |name: String, bytes: &[u8]| -> Result<()> {
        fs::write(dir.join(&name), bytes).with_context(|| format!("writing {name}"))?;
        files.push(name);
        Ok(())
    };
    let o = &run.outcome;
    for a in &o.artifacts {
        put(a.name.clone(), &a.bytes)?;
    }
    for l in &o.ladders {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &l.rows {
            w.serialize(r)?;
        }
        put(ladder_file(&l.label), &w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?)?;
    }
    if is_verification(&cfg.experiment) {
        put("verdicts.json".into(), &serde_json::to_vec_pretty(&o.verdicts)?)?;
    }
    if !o.diagnostics.is_empty() {
        put("diagnostics.json".into(), &serde_json::to_vec_pretty(&o.diagnostics)?)?;
    }
    let m = Manifest {
        schema_version: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION"),
        name: &cfg.name,
        kind: cfg.experiment.kind(),
        seed: cfg.seed,
        threads: run.threads,
        config: cfg,
        partial: run.error.is_some(),
        error: run.error.as_deref(),
        passed: run.passed(),
        files: files.clone(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&m)?).context("writing manifest.json")?;
    files.push("manifest.json".into());
    Ok(files)
}
