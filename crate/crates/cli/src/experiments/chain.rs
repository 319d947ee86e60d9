//! Experiments that run the collision chain: raw event streams, marginal
//! invariance checks, clock convergence and return frequencies.

use anyhow::Result;
use fallgas::diffusion::{bessel_map, sample_bessel_stopped, LimitKind};
use fallgas::rng::{derive_seed, par_streams, substream, Stream};
use fallgas::simulator::{clock_sup_difference, run_skeleton, sample_path, StopReason};
use fallgas::stats::{
    bessel_reference, invariance_marginal_test, ks_two_sample, median, power_law_chain, recurrence_scan,
    RecurrenceSpec, REFERENCE_FACTOR,
};
use fallgas::{DensityProfile, FlightParams, ScalingRegime, ScatterLaw, StoppingSpec};
use serde::Serialize;
use serde_json::json;

use super::{check, ALPHA};
use crate::config::*;
use crate::experiments::moments::increasing;
use crate::outcome::{Outcome, Rule, Verdict};

pub const CLOCK_RATIO_TOL: f64 = 0.25;
pub const RECURRENT_MIN_FRACTION: f64 = 0.95;
pub const TRANSIENT_MAX_FRACTION: f64 = 0.5;

fn simulate_law(p: &SimulateParams) -> Result<ScatterLaw> {
    Ok(ScatterLaw::new(p.density.build()?, FlightParams::new(p.g, p.d)?, p.regime.build())?)
}

fn stopping(p: &SimulateParams) -> StoppingSpec {
    StoppingSpec {
        max_events: p.max_events,
        max_clock: p.max_clock,
        upper_level: p.upper_level,
        lower_level: p.lower_level,
    }
}

pub fn validate_simulate(p: &SimulateParams) -> Result<()> {
    simulate_law(p)?;
    stopping(p).validate()?;
    check(p.y_init <= 0.0, "y_init", "must be <= 0")?;
    check(p.paths >= 1, "paths", "need at least one path")?;
    if let Some(v) = p.upper_level {
        check(p.y_init < v || p.lower_level.is_some(), "upper_level", "start must lie below the upper level")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EventRow {
    path: usize,
    m: u64,
    #[serde(rename = "Y")]
    y: f64,
    dt: f64,
    #[serde(rename = "T")]
    t: f64,
    u_d: f64,
}

#[derive(Serialize)]
struct PathRow {
    path: usize,
    t: f64,
    #[serde(rename = "Y")]
    y: f64,
}

#[derive(Serialize)]
struct SummaryRow {
    path: usize,
    events: u64,
    stop: &'static str,
    window_start: Option<usize>,
    final_y: f64,
    final_t: f64,
}

fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::MaxEvents => "max-events",
        StopReason::MaxClock => "max-clock",
        StopReason::UpperLevel => "upper-level",
    }
}

pub fn simulate(p: &SimulateParams, seed: u64, out: &mut Outcome) -> Result<()> {
    let law = simulate_law(p)?;
    let spec = stopping(p);
    let runs = par_streams(seed, p.paths, |_, r: &mut Stream| run_skeleton(&law, p.y_init, spec, r.clone()));
    let mut events = Vec::new();
    let mut paths = Vec::new();
    let mut summary = Vec::new();
    for (i, s) in runs.into_iter().enumerate() {
        let s = s?;
        for rec in s.records.iter().filter(|r| r.m >= 1) {
            events.push(EventRow { path: i, m: rec.m, y: rec.y, dt: rec.dt, t: rec.t, u_d: rec.u_d() });
        }
        if p.refine > 0 && s.records.len() > 1 {
            let (ts, ys) = sample_path(&law, &s.records, p.refine);
            paths.extend(ts.into_iter().zip(ys).map(|(t, y)| PathRow { path: i, t, y }));
        }
        let last = s.records.last().expect("the start is recorded");
        summary.push(SummaryRow {
            path: i,
            events: last.m,
            stop: stop_name(s.stop),
            window_start: s.window_start,
            final_y: last.y,
            final_t: last.t,
        });
    }
    out.jsonl("events.jsonl", &events)?;
    if p.max_events > 0 {
        out.csv("summary.csv", &summary)?;
        if p.refine > 0 {
            out.csv("path.csv", &paths)?;
        }
        out.diag("events", events.len());
    }
    Ok(())
}

pub fn validate_invariance(c: &InvarianceCheck) -> Result<()> {
    match c {
        InvarianceCheck::RawPowerLaw(p) => {
            check(!p.cases.is_empty(), "cases", "need at least one")?;
            for cs in &p.cases {
                power_law_chain(p.c, cs.lambda, cs.d, p.g)?;
                let m = bessel_map(cs.lambda, cs.d, LimitKind::RawPublished, p.c, p.g);
                check(m.sampleable, "cases", "the Bessel dimension must be positive")?;
            }
            check(p.t > 0.0, "t", "must be positive")?;
            check(!p.ns.is_empty() && p.ns.windows(2).all(|w| w[1] > w[0]), "ns", "need an increasing ladder")?;
            check(p.paths >= fallgas::stats::KS_MIN_SAMPLES, "paths", "too few for KS")?;
        }
        InvarianceCheck::RescaledCutoff(p) => {
            FlightParams::new(p.g, 2)?;
            check(p.y0 < p.v && p.v < 0.0, "v", "need y0 < v < 0")?;
            check(p.s > 0.0, "s", "must be positive")?;
            check(p.n >= 1.0, "n", "must be >= 1")?;
            check(p.paths >= fallgas::stats::KS_MIN_SAMPLES, "paths", "too few for KS")?;
            check(p.reference_steps >= 1, "reference_steps", "must be positive")?;
        }
    }
    Ok(())
}

pub fn invariance(c: &InvarianceCheck, seed: u64, out: &mut Outcome) -> Result<()> {
    match c {
        InvarianceCheck::RawPowerLaw(p) => raw_invariance(p, seed, out),
        InvarianceCheck::RescaledCutoff(p) => cutoff_invariance(p, seed, out),
    }
}

#[derive(Serialize)]
struct MarginalRow {
    d: usize,
    lambda: f64,
    n: u64,
    ks: f64,
    critical: f64,
}

#[derive(Serialize)]
struct SampleRow {
    index: usize,
    chain: f64,
    reference: f64,
}

fn raw_invariance(p: &RawInvarianceParams, seed: u64, out: &mut Outcome) -> Result<()> {
    let mut rows = Vec::new();
    for (i, cs) in p.cases.iter().enumerate() {
        let law = power_law_chain(p.c, cs.lambda, cs.d, p.g)?;
        let s = derive_seed(seed, i as u64);
        let scan = invariance_marginal_test(&law, LimitKind::RawPublished, p.t, &p.ns, p.paths, ALPHA, s)?;
        let key = format!("invariance/d={}/lambda={}", cs.d, cs.lambda);
        let top = scan.rungs.last().unwrap();
        out.verdict(Verdict::ks(format!("{key}/top"), &top.ks));
        let stats: Vec<f64> = scan.rungs.iter().map(|r| r.ks.statistic).collect();
        out.verdict(Verdict::decreasing(format!("{key}/decreasing"), &stats));
        // the same top-rung sample against the skeleton-generator map
        let exact = bessel_map(cs.lambda, cs.d, LimitKind::Skeleton, p.c, p.g);
        let mut r = substream(derive_seed(s, 0x5e1e), 0);
        let reference = bessel_reference(&exact, p.t, p.paths * REFERENCE_FACTOR, &mut r)?;
        let ks = ks_two_sample(&scan.top_samples, &reference, ALPHA)?;
        out.diag(
            format!("{key}/skeleton_map"),
            json!({"delta": exact.delta, "quoted_delta": scan.map.delta, "ks": ks.statistic, "critical": ks.critical}),
        );
        for r in &scan.rungs {
            rows.push(MarginalRow { d: cs.d, lambda: cs.lambda, n: r.n, ks: r.ks.statistic, critical: r.ks.critical });
        }
        let samples: Vec<SampleRow> = scan
            .top_samples
            .iter()
            .zip(&scan.reference)
            .enumerate()
            .map(|(index, (&chain, &reference))| SampleRow { index, chain, reference })
            .collect();
        out.csv(format!("marginal_d{}_l{}.csv", cs.d, cs.lambda), &samples)?;
    }
    out.csv("invariance.csv", &rows)
}

fn cutoff_invariance(p: &CutoffInvarianceParams, seed: u64, out: &mut Outcome) -> Result<()> {
    let base = DensityProfile::constant(1.0)?;
    let law = ScatterLaw::new(base, FlightParams::new(p.g, 2)?, ScalingRegime::RescaledDynamics { n: p.n })?;
    let steps = (p.n * p.s).floor() as u64;
    let spec = StoppingSpec::events(steps).with_upper(p.v);
    let chain = par_streams(derive_seed(seed, 0), p.paths, |_, r: &mut Stream| -> fallgas::Result<(f64, bool)> {
        let sk = run_skeleton(&law, p.y0, spec, r.clone())?;
        let y = sk.records.last().unwrap().y;
        Ok((y.min(p.v), sk.stop == StopReason::UpperLevel))
    });
    let chain = chain.into_iter().collect::<fallgas::Result<Vec<_>>>()?;
    let map = bessel_map(0.0, 2, LimitKind::Skeleton, 1.0, p.g);
    let (x0, level) = (map.from_depth(p.y0), map.from_depth(p.v));
    let reference = par_streams(derive_seed(seed, 1), p.paths, |_, r: &mut Stream| -> fallgas::Result<(f64, bool)> {
        let (x, hit) = sample_bessel_stopped(map.delta, x0, level, map.clock * p.s, p.reference_steps, r)?;
        Ok((map.to_depth(x), hit))
    });
    let reference = reference.into_iter().collect::<fallgas::Result<Vec<_>>>()?;
    let a: Vec<f64> = chain.iter().map(|c| c.0).collect();
    let b: Vec<f64> = reference.iter().map(|c| c.0).collect();
    let ks = ks_two_sample(&a, &b, ALPHA)?;
    out.verdict(Verdict::ks("cutoff/ks", &ks));
    let frac = |v: &[(f64, bool)]| v.iter().filter(|c| c.1).count() as f64 / v.len() as f64;
    out.diag(
        "cutoff",
        json!({"delta": map.delta, "steps": steps, "stopped_chain": frac(&chain), "stopped_reference": frac(&reference)}),
    );
    let rows: Vec<SampleRow> = a
        .iter()
        .zip(&b)
        .enumerate()
        .map(|(index, (&chain, &reference))| SampleRow { index, chain, reference })
        .collect();
    out.csv("cutoff.csv", &rows)
}

pub fn validate_clock(p: &ClockParams) -> Result<()> {
    for &n in &p.ns {
        ScatterLaw::new(p.density.build()?, FlightParams::new(p.g, p.d)?, ScalingRegime::RescaledDynamics { n })?;
    }
    check(increasing(&p.ns) && p.ns.len() >= 2, "ns", "need an increasing ladder of at least two rungs")?;
    check(p.ns.iter().all(|n| n.fract() == 0.0), "ns", "must be whole numbers")?;
    check(p.y0 < p.v && p.v < 0.0, "v", "need y0 < v < 0")?;
    check(p.paths >= 1, "paths", "need at least one")?;
    Ok(())
}

#[derive(Serialize)]
struct ClockRow {
    n: f64,
    path: usize,
    sup_difference: f64,
}

pub fn clock(p: &ClockParams, seed: u64, out: &mut Outcome) -> Result<()> {
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for (i, &n) in p.ns.iter().enumerate() {
        let law =
            ScatterLaw::new(p.density.build()?, FlightParams::new(p.g, p.d)?, ScalingRegime::RescaledDynamics { n })?;
        let k_max = n as usize;
        let spec = StoppingSpec::events(k_max as u64).with_upper(p.v);
        let sups = par_streams(derive_seed(seed, i as u64), p.paths, |_, r: &mut Stream| -> fallgas::Result<f64> {
            let sk = run_skeleton(&law, p.y0, spec, r.clone())?;
            Ok(clock_sup_difference(&law, &sk.records, p.v, k_max))
        });
        let sups = sups.into_iter().collect::<fallgas::Result<Vec<_>>>()?;
        medians.push(median(&sups));
        rows.extend(sups.iter().enumerate().map(|(path, &s)| ClockRow { n, path, sup_difference: s }));
    }
    out.verdict(Verdict::decreasing("clock/decreasing", &medians));
    let ratio = medians.last().unwrap() / medians[0];
    out.verdict(Verdict::new("clock/ratio", ratio, 0.0, CLOCK_RATIO_TOL, Rule::Below));
    out.diag("clock/medians", &medians);
    out.csv("clock.csv", &rows)
}

pub fn validate_recurrence(p: &RecurrenceParams) -> Result<()> {
    check(!p.cases.is_empty(), "cases", "need at least one")?;
    for (i, c) in p.cases.iter().enumerate() {
        power_law_chain(p.c, c.lambda, c.d, p.g)?;
        let f = |s: &str| format!("cases[{i}].{s}");
        check(c.level < 0.0, &f("level"), "must be negative")?;
        check(
            increasing(&c.drop_factors) && c.drop_factors[0] > 1.0,
            &f("drop_factors"),
            "need increasing factors > 1",
        )?;
        check(
            !c.horizons.is_empty() && c.horizons[0] > 0 && c.horizons.windows(2).all(|w| w[1] > w[0]),
            &f("horizons"),
            "need increasing positive horizons",
        )?;
        check(c.trials >= 1, &f("trials"), "need at least one")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ReturnRow {
    d: usize,
    lambda: f64,
    factor: f64,
    dropped: u64,
    horizon: u64,
    fraction: f64,
    se: f64,
}

pub fn recurrence(p: &RecurrenceParams, seed: u64, out: &mut Outcome) -> Result<()> {
    let mut rows = Vec::new();
    for (i, c) in p.cases.iter().enumerate() {
        let law = power_law_chain(p.c, c.lambda, c.d, p.g)?;
        let spec = RecurrenceSpec {
            level: c.level,
            drop_factors: c.drop_factors.clone(),
            horizons: c.horizons.clone(),
            trials: c.trials,
            growth_paths: p.growth_paths,
            growth_events: p.growth_events,
        };
        let scan = recurrence_scan(&law, &spec, derive_seed(seed, i as u64))?;
        let key = format!("recurrence/d={}/lambda={}", c.d, c.lambda);
        let lasts: Vec<f64> = scan.fractions.iter().map(|f| f.last().fraction).collect();
        match c.d {
            1 | 2 => {
                out.verdict(Verdict::new(format!("{key}/returns"), lasts[0], 1.0, RECURRENT_MIN_FRACTION, Rule::Above));
            }
            3 => {}
            _ => {
                for (f, &x) in scan.fractions.iter().zip(&lasts) {
                    out.verdict(Verdict::new(
                        format!("{key}/factor={}", f.factor),
                        x,
                        0.0,
                        TRANSIENT_MAX_FRACTION,
                        Rule::Below,
                    ));
                }
                out.verdict(Verdict::decreasing(format!("{key}/decreasing"), &lasts));
            }
        }
        out.diag(
            key,
            json!({"growth_exponent": scan.growth_exponent, "growth_target": scan.growth_target,
                   "fractions": lasts, "dropped": scan.fractions.iter().map(|f| f.dropped).collect::<Vec<_>>(),
                   "total_events": scan.total_events}),
        );
        for f in &scan.fractions {
            for h in &f.by_horizon {
                rows.push(ReturnRow {
                    d: c.d,
                    lambda: c.lambda,
                    factor: f.factor,
                    dropped: f.dropped,
                    horizon: h.horizon,
                    fraction: h.fraction,
                    se: h.se,
                });
            }
        }
    }
    out.csv("recurrence.csv", &rows)
}
