//! Deterministic checks: scale function and boundary integral, Bessel
//! dimension arithmetic, the unit-step model, and the reflection experiment.

use anyhow::Result;
use fallgas::diffusion::{bessel_map, scale_speed, time_changed_dimension, Boundary, LimitKind};
use fallgas::reflection::{cap_measure, density_ratio_witness, theta_cdf, uniformity_experiment};
use fallgas::rng::{derive_seed, substream};
use fallgas::{unit_step_time, FlightParams};
use serde::Serialize;
use serde_json::json;

use super::{check, density_label, ALPHA};
use crate::config::*;
use crate::outcome::{rel_err, LadderRow, Outcome, Rule, Verdict};

pub const SCALE_TOL: f64 = 1e-8;
pub const KAPPA_TOL: f64 = 1e-6;
pub const HARMONIC_TOL: f64 = 1e-6;
pub const UNIT_STEP_REL_TOL: f64 = 0.005;
pub const WITNESS_TOL: f64 = 1e-8;
/// Smallest |witness - 1| accepted as "different from 1".
pub const WITNESS_GAP: f64 = 1e-3;

pub fn validate(c: &LimitCheck) -> Result<()> {
    match c {
        LimitCheck::ScaleSpeed(p) => {
            check(p.d >= 1, "d", "must be >= 1")?;
            let h = p.density.build()?;
            check(h.exponent().is_some(), "density", "the scale check needs a constant or power-law density")?;
            check(p.y < 0.0, "y", "must be negative")?;
            p.singular.build()?;
            for h in &p.harmonic_densities {
                h.build()?;
            }
            check(!p.dims.is_empty() && p.dims.iter().all(|d| *d >= 1), "dims", "need dimensions >= 1")?;
            check(!p.grid.is_empty() && p.grid.iter().all(|y| *y < 0.0), "grid", "need negative depths")?;
        }
        LimitCheck::DimensionArithmetic(p) => {
            check(!p.dims.is_empty() && p.dims.iter().all(|d| *d >= 1), "dims", "need dimensions >= 1")?;
            check(!p.lambdas.is_empty() && p.lambdas.iter().all(|l| *l >= 0.0), "lambdas", "need lambda >= 0")?;
        }
        LimitCheck::UnitStep(p) => {
            FlightParams::new(p.g, 2)?;
            check(p.y < 0.0, "y", "must be negative")?;
            check(p.theta.abs() <= std::f64::consts::FRAC_PI_2, "theta", "must lie in [-pi/2, pi/2]")?;
            check(!p.ns.is_empty() && p.ns.iter().all(|n| *n >= 1.0), "ns", "need n >= 1")?;
            check(p.ns.iter().all(|n| n.sqrt() * p.y <= -1.0), "ns", "the scaled depth must be <= -1")?;
        }
    }
    Ok(())
}

pub fn run(c: &LimitCheck, out: &mut Outcome) -> Result<()> {
    match c {
        LimitCheck::ScaleSpeed(p) => scale(p, out),
        LimitCheck::DimensionArithmetic(p) => dimensions(p, out),
        LimitCheck::UnitStep(p) => unit_step(p, out),
    }
}

/// `G(y) = ∫_{-1}^y c |u|^q du` with `q = l - (d-1)/2`.
pub fn scale_closed_form(c: f64, lambda: f64, d: usize, y: f64) -> f64 {
    let q = lambda - 0.5 * (d as f64 - 1.0);
    let x = -y;
    if q == -1.0 {
        -c * x.ln()
    } else {
        -c * (x.powf(q + 1.0) - 1.0) / (q + 1.0)
    }
}

/// `kappa(0) = d c^2 / ((q + 1)(2 l + 2))`, finite when `q > -1`.
pub fn kappa_closed_form(c: f64, lambda: f64, d: usize) -> Option<f64> {
    let q = lambda - 0.5 * (d as f64 - 1.0);
    (q > -1.0).then(|| d as f64 * c * c / ((q + 1.0) * (2.0 * lambda + 2.0)))
}

#[derive(Serialize)]
struct HarmonicRow {
    density: String,
    d: usize,
    y: f64,
    residual: f64,
    normalizer: f64,
}

fn scale(p: &ScaleSpeedParams, out: &mut Outcome) -> Result<()> {
    let h = p.density.build()?;
    let (c, lambda) = (h.amplitude().unwrap(), h.exponent().unwrap());
    let ss = scale_speed(&h, p.d);
    let g = ss.scale(p.y);
    out.verdict(Verdict::new("scale/G", g, scale_closed_form(c, lambda, p.d, p.y), SCALE_TOL, Rule::Abs));
    match (ss.kappa_at_zero(), kappa_closed_form(c, lambda, p.d)) {
        (Boundary::Finite(k), Some(t)) => out.verdict(Verdict::new("scale/kappa", k, t, KAPPA_TOL, Rule::Abs)),
        (b, t) => {
            out.diag("scale/kappa", format!("{b:?} against {t:?}"));
            out.verdict(Verdict::new("scale/kappa", f64::NAN, t.unwrap_or(f64::INFINITY), KAPPA_TOL, Rule::Abs));
        }
    }
    let singular = scale_speed(&p.singular.build()?, p.d).kappa_at_zero();
    let flagged = singular == Boundary::Infinite;
    out.diag("scale/singular", format!("{singular:?}"));
    out.verdict(Verdict::new(
        format!("scale/divergent/{}", density_label(&p.singular)),
        if flagged { 1.0 } else { 0.0 },
        1.0,
        0.0,
        Rule::Abs,
    ));
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for spec in &p.harmonic_densities {
        let h = spec.build()?;
        for &d in &p.dims {
            let ss = scale_speed(&h, d);
            for &y in &p.grid {
                let (residual, normalizer) = ss.harmonicity_residual(y);
                worst = worst.max(residual / normalizer);
                rows.push(HarmonicRow { density: density_label(spec), d, y, residual, normalizer });
            }
        }
    }
    out.verdict(Verdict::new("scale/harmonic", worst, 0.0, HARMONIC_TOL, Rule::Below));
    out.csv("harmonicity.csv", &rows)
}

#[derive(Serialize)]
struct DimensionRow {
    d: usize,
    lambda: f64,
    natural_delta: f64,
    time_changed_delta: f64,
    quoted_raw_delta: f64,
    exact_raw_delta: f64,
}

fn dimensions(p: &DimensionParams, out: &mut Outcome) -> Result<()> {
    let mut rows = Vec::new();
    let (mut rescaled_bad, mut raw_bad, mut exact_raw_disagree) = (0, 0, Vec::new());
    for &d in &p.dims {
        for &lambda in &p.lambdas {
            let nat = bessel_map(lambda, d, LimitKind::Natural, 1.0, 1.0).delta;
            let tc = time_changed_dimension(lambda, d);
            let quoted = bessel_map(lambda, d, LimitKind::RawPublished, 1.0, 1.0).delta;
            let exact = bessel_map(lambda, d, LimitKind::Skeleton, 1.0, 1.0).delta;
            let rescaled_rule = lambda >= 0.5 * (d as f64 - 3.0);
            if (nat <= 2.0) != rescaled_rule || (tc <= 2.0) != rescaled_rule {
                rescaled_bad += 1;
            }
            if (quoted <= 2.0) != (d <= 3) {
                raw_bad += 1;
            }
            if (exact <= 2.0) != (d <= 3) {
                exact_raw_disagree.push((d, lambda));
            }
            rows.push(DimensionRow {
                d,
                lambda,
                natural_delta: nat,
                time_changed_delta: tc,
                quoted_raw_delta: quoted,
                exact_raw_delta: exact,
            });
        }
    }
    out.verdict(Verdict::new("dimension/rescaled", rescaled_bad as f64, 0.0, 0.0, Rule::AtMost));
    out.verdict(Verdict::new("dimension/raw", raw_bad as f64, 0.0, 0.0, Rule::AtMost));
    out.diag("dimension/exact_raw_disagrees_at", exact_raw_disagree);
    out.csv("dimensions.csv", &rows)
}

#[derive(Serialize)]
struct UnitStepRow {
    n: f64,
    scaled_time: f64,
    scaled_difference: f64,
}

fn unit_step(p: &UnitStepParams, out: &mut Outcome) -> Result<()> {
    let params = FlightParams::new(p.g, 2)?;
    let (g, x) = (p.g, -p.y);
    let t_target = 1.0 / (2.0 * g * x).sqrt();
    let d_target = p.theta.sin() / (8.0 * g * x.powi(3)).sqrt();
    let (mut lt, mut ld, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for &n in &p.ns {
        let y = n.sqrt() * p.y;
        let up = unit_step_time(y, p.theta.sin(), params)?;
        let down = unit_step_time(y, -p.theta.sin(), params)?;
        let st = n.powf(0.25) * up;
        let sd = n.powf(0.75) * (up - down);
        lt.push(LadderRow { rung: n, statistic: st, target: t_target, se: 0.0, error: rel_err(st, t_target) });
        ld.push(LadderRow { rung: n, statistic: sd, target: d_target, se: 0.0, error: rel_err(sd, d_target) });
        rows.push(UnitStepRow { n, scaled_time: st, scaled_difference: sd });
    }
    let (a, b) = (lt.last().unwrap().statistic, ld.last().unwrap().statistic);
    out.verdict(Verdict::new("unit-step/time", a, t_target, UNIT_STEP_REL_TOL, Rule::Rel));
    out.verdict(Verdict::new("unit-step/difference", b, d_target, UNIT_STEP_REL_TOL, Rule::Rel));
    out.ladder("unit-step/time", lt);
    out.ladder("unit-step/difference", ld);
    out.csv("unit_step.csv", &rows)
}

pub fn validate_reflection(p: &ReflectionParams) -> Result<()> {
    check(!p.dims.is_empty() && p.dims.iter().all(|d| *d >= 2), "dims", "need d >= 2")?;
    check(p.samples >= 10_000, "samples", "need at least 10^4 draws")?;
    check(p.plot_points >= 2, "plot_points", "need at least 2")?;
    Ok(())
}

#[derive(Serialize)]
struct ReflectionRow {
    d: usize,
    beta: f64,
    ecdf: f64,
    theta_cdf: f64,
    cap_measure: f64,
}

pub fn reflection(p: &ReflectionParams, seed: u64, out: &mut Outcome) -> Result<()> {
    let mut rows = Vec::new();
    for &d in &p.dims {
        let mut r = substream(derive_seed(seed, d as u64), 0);
        let rep = uniformity_experiment(d, p.samples, ALPHA, &mut r)?;
        let key = format!("reflection/d={d}");
        out.verdict(Verdict::ks(format!("{key}/theta"), &rep.vs_theta_cdf));
        if d == 3 {
            out.verdict(Verdict::ks(format!("{key}/cap"), &rep.vs_cap_measure));
        } else {
            out.verdict(Verdict::ks_reject(format!("{key}/cap"), &rep.vs_cap_measure));
        }
        let w = density_ratio_witness(d)?;
        let exact = (2.0 * (std::f64::consts::PI / 8.0).sin()).powi(3 - d as i32);
        out.verdict(Verdict::new(format!("{key}/witness"), w, exact, WITNESS_TOL, Rule::Abs));
        if d != 3 {
            out.verdict(Verdict::new(format!("{key}/witness_gap"), (w - 1.0).abs(), 0.0, WITNESS_GAP, Rule::Above));
        }
        out.diag(format!("{key}/radius_ks"), json!({"ks": rep.radius.statistic, "critical": rep.radius.critical}));
        let mut th = rep.thetas;
        th.sort_by(f64::total_cmp);
        for k in 1..=p.plot_points {
            let beta = std::f64::consts::PI * k as f64 / p.plot_points as f64;
            let ecdf = th.partition_point(|&t| t <= beta) as f64 / th.len() as f64;
            rows.push(ReflectionRow {
                d,
                beta,
                ecdf,
                theta_cdf: theta_cdf(beta, d),
                cap_measure: cap_measure(beta, d)?,
            });
        }
    }
    out.csv("reflection.csv", &rows)
}
