//! Validation and dispatch of experiment kinds.

pub mod chain;
pub mod limits;
pub mod moments;

use anyhow::{anyhow, bail, Context, Result};
use fallgas::rng::{derive_seed, tag};
use serde_json::json;

use crate::config::{DensitySpec, Experiment, ExperimentConfig};
use crate::outcome::{Outcome, Rule, Verdict};

/// Significance level of every KS verdict.
pub const ALPHA: f64 = 0.01;
/// Monte Carlo verdicts allow this many standard errors.
pub const K_SE: f64 = 3.0;
/// Largest difference between aggregated statistics under different worker counts.
pub const THREAD_TOL: f64 = 1e-12;

pub(crate) fn check(ok: bool, field: &str, msg: &str) -> Result<()> {
    if !ok {
        bail!("invalid field `{field}`: {msg}");
    }
    Ok(())
}

pub fn density_label(spec: &DensitySpec) -> String {
    match spec {
        DensitySpec::Constant { c } => format!("const{c}"),
        DensitySpec::PowerLaw { c, lambda } => format!("pow{c}x{lambda}"),
        DensitySpec::Builtin { name } => name.clone(),
    }
}

/// Checks every field before any work is scheduled.
pub fn validate(cfg: &ExperimentConfig) -> Result<()> {
    check(!cfg.name.trim().is_empty(), "name", "must not be empty")?;
    if let Some(t) = cfg.threads {
        check(t >= 1, "threads", "must be positive")?;
    }
    let e = &cfg.experiment;
    let r = match e {
        Experiment::Simulate(p) => chain::validate_simulate(p),
        Experiment::VerifyMoments(c) => moments::validate(c),
        Experiment::VerifyFluctuations(p) => validate_fluctuations(p),
        Experiment::Invariance(c) => chain::validate_invariance(c),
        Experiment::Recurrence(p) => chain::validate_recurrence(p),
        Experiment::Limits(c) => limits::validate(c),
        Experiment::Reflection(p) => limits::validate_reflection(p),
        Experiment::Clock(p) => chain::validate_clock(p),
        Experiment::Reproducibility(p) => {
            check(!p.threads.is_empty() && p.threads.iter().all(|t| *t >= 1), "threads", "need positive counts")?;
            check(!p.runs.is_empty(), "runs", "need at least one run")?;
            for (i, run) in p.runs.iter().enumerate() {
                if let Experiment::Reproducibility(_) = run.experiment {
                    bail!("invalid field `runs[{i}]`: reproducibility runs cannot nest");
                }
                validate(run).with_context(|| format!("in runs[{i}] ({})", run.name))?;
            }
            Ok(())
        }
    };
    r.with_context(|| format!("experiment `{}` ({})", cfg.name, e.kind()))
}

fn validate_fluctuations(p: &crate::config::FluctuationParams) -> Result<()> {
    fallgas::FlightParams::new(p.g, p.d)?;
    for d in &p.densities {
        d.build()?;
    }
    check(p.y < 0.0, "y", "must be negative")?;
    check((-1.0..=1.0).contains(&p.u_d), "u_d", "must lie in [-1, 1]")?;
    check(moments::increasing(&p.ns) && p.ns[0] >= 1.0, "ns", "need an increasing ladder >= 1")?;
    for l in &p.lambdas {
        fallgas::DensityProfile::power_law(p.c, *l)?;
    }
    check(moments::increasing(&p.depths) && p.depths[0] > 0.0, "depths", "need increasing positive depths")?;
    check(!p.densities.is_empty() || !p.lambdas.is_empty(), "densities", "nothing to run")?;
    Ok(())
}

/// Result of running one configuration in memory.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: Outcome,
    /// Set when a worker failed after validation; the outcome is partial.
    pub error: Option<String>,
    pub threads: usize,
}

impl RunResult {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.outcome.all_pass()
    }
}

/// Validates, then runs on a dedicated pool. Validation failures are errors;
/// failures during the run are returned alongside the partial outcome.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    validate(cfg)?;
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        b = b.num_threads(t);
    }
    let pool = b.build().map_err(|e| anyhow!("thread pool: {e}"))?;
    let threads = pool.current_num_threads();
    let seed = derive_seed(cfg.seed, tag(cfg.experiment.kind()));
    let mut outcome = Outcome::default();
    let r = pool.install(|| dispatch(&cfg.experiment, seed, &mut outcome));
    Ok(RunResult { outcome, error: r.err().map(|e| format!("{e:#}")), threads })
}

fn dispatch(e: &Experiment, seed: u64, out: &mut Outcome) -> Result<()> {
    match e {
        Experiment::Simulate(p) => chain::simulate(p, seed, out),
        Experiment::VerifyMoments(c) => moments::run(c, seed, out),
        Experiment::VerifyFluctuations(p) => moments::run_fluctuations(p, out),
        Experiment::Invariance(c) => chain::invariance(c, seed, out),
        Experiment::Recurrence(p) => chain::recurrence(p, seed, out),
        Experiment::Limits(c) => limits::run(c, out),
        Experiment::Reflection(p) => limits::reflection(p, seed, out),
        Experiment::Clock(p) => chain::clock(p, seed, out),
        Experiment::Reproducibility(p) => reproducibility(p, out),
    }
}

fn artifact_mismatches(a: &Outcome, b: &Outcome) -> usize {
    let names = |o: &Outcome| o.artifacts.iter().map(|x| x.name.clone()).collect::<Vec<_>>();
    if names(a) != names(b) {
        return a.artifacts.len().max(b.artifacts.len()).max(1);
    }
    a.artifacts.iter().zip(&b.artifacts).filter(|(x, y)| x.bytes != y.bytes).count()
}

fn statistic_gap(a: &Outcome, b: &Outcome) -> f64 {
    if a.verdicts.len() != b.verdicts.len() {
        return f64::INFINITY;
    }
    a.verdicts
        .iter()
        .zip(&b.verdicts)
        .map(|(x, y)| {
            if x.criterion != y.criterion {
                f64::INFINITY
            } else if x.statistic.is_nan() && y.statistic.is_nan() {
                0.0
            } else {
                (x.statistic - y.statistic).abs()
            }
        })
        .fold(0.0, f64::max)
}

fn reproducibility(p: &crate::config::ReproducibilityParams, out: &mut Outcome) -> Result<()> {
    for run in &p.runs {
        let at = |t: usize| -> Result<RunResult> {
            let mut c = run.clone();
            c.threads = Some(t);
            let r = run_experiment(&c)?;
            if let Some(e) = &r.error {
                bail!("run `{}` failed: {e}", run.name);
            }
            Ok(r)
        };
        let first = at(p.threads[0])?;
        let again = at(p.threads[0])?;
        let key = format!("reproducibility/{}", run.name);
        let rerun = artifact_mismatches(&first.outcome, &again.outcome);
        out.verdict(Verdict::new(format!("{key}/rerun"), rerun as f64, 0.0, 0.0, Rule::AtMost));
        for &t in &p.threads[1..] {
            let other = at(t)?;
            let gap = statistic_gap(&first.outcome, &other.outcome);
            out.verdict(Verdict::new(format!("{key}/threads={t}"), gap, 0.0, THREAD_TOL, Rule::AtMost));
            out.diag(
                format!("{key}/threads={t}"),
                json!({"artifact_mismatches": artifact_mismatches(&first.outcome, &other.outcome)}),
            );
        }
        out.diag(
            format!("{key}/artifacts"),
            first.outcome.artifacts.iter().map(|a| (a.name.clone(), a.bytes.len())).collect::<Vec<_>>(),
        );
    }
    Ok(())
}
