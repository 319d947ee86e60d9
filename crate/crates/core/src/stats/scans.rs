//! Monte Carlo scans over the unrescaled power-law chain: one-step moments,
//! return frequencies, fixed-time marginals against Bessel references, and the
//! hazard identities at the sampled flight time.

use rand::Rng;
use serde::Serialize;

use super::{ks_two_sample, ols_slope, proportion, KsResult, LadderReport, LadderRung, MomentAccumulator};
use crate::density::DensityProfile;
use crate::diffusion::{bessel_map, BesselMap, LimitKind};
use crate::dynamics::{FlightParams, ParabolicFlight};
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, par_streams, Stream};
use crate::scattering::ScatterLaw;
use crate::simulator::{sample_direction, ScalingRegime, SkeletonChain, StoppingSpec};

fn power_law_parts(law: &ScatterLaw) -> Result<(f64, f64)> {
    if law.regime() != ScalingRegime::Raw {
        return Err(invalid("regime", "scans run the unrescaled chain"));
    }
    match (law.profile().amplitude(), law.profile().exponent()) {
        (Some(c), Some(l)) => Ok((c, l)),
        _ => Err(invalid("density", "scans need a constant or power-law density")),
    }
}

/// Lamperti map `c |y|^(l+1) / (l+1)` evaluated at `x = |y|`.
fn lamperti(c: f64, lambda: f64, x: f64) -> f64 {
    c * x.powf(lambda + 1.0) / (lambda + 1.0)
}

/// Limits of the scaled one-step moments of the power-law chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OneStepTargets {
    /// `x h^2 mu_1`
    pub drift: f64,
    /// `h^2 mu_2`
    pub variance: f64,
    /// `f(x) E[f(X_1) - f(x)]` for the Lamperti map f
    pub lamperti_drift: f64,
    /// `E[(f(X_1) - f(x))^2]`
    pub lamperti_variance: f64,
}

impl OneStepTargets {
    /// The values as commonly quoted: drift `(d+2l-1)/(2d)`.
    pub fn published(d: usize, lambda: f64) -> Self {
        let df = d as f64;
        OneStepTargets {
            drift: (df + 2.0 * lambda - 1.0) / (2.0 * df),
            variance: 2.0 / df,
            lamperti_drift: (df + 2.0 * lambda - 1.0) / (2.0 * df * (1.0 + lambda)),
            lamperti_variance: 2.0 / df,
        }
    }

    /// The values implied by the skeleton generator: drift `(d-1-2l)/(2d)`,
    /// and `(d-1)/(2d(1+l))` after the Lamperti map.
    pub fn exact(d: usize, lambda: f64) -> Self {
        let df = d as f64;
        OneStepTargets {
            drift: (df - 1.0 - 2.0 * lambda) / (2.0 * df),
            variance: 2.0 / df,
            lamperti_drift: (df - 1.0) / (2.0 * df * (1.0 + lambda)),
            lamperti_variance: 2.0 / df,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OneStepScan {
    pub d: usize,
    pub lambda: f64,
    pub xs: Vec<f64>,
    pub paths: usize,
    /// Accumulated statistics per rung, in the order drift, variance,
    /// Lamperti drift, Lamperti variance.
    #[serde(skip)]
    pub accumulators: Vec<[MomentAccumulator; 4]>,
    pub published: [LadderReport; 4],
    pub exact: [LadderReport; 4],
}

pub const ONE_STEP_LABELS: [&str; 4] = ["drift", "variance", "lamperti_drift", "lamperti_variance"];

/// One collision from depth `-x` for each of `paths` independent streams; the
/// displacement is formed without cancellation.
pub fn one_step_moment_scan(law: &ScatterLaw, xs: &[f64], paths: usize, seed: u64, k_se: f64) -> Result<OneStepScan> {
    let (c, lambda) = power_law_parts(law)?;
    if xs.len() < 2 || xs.windows(2).any(|w| !(w[1] > w[0])) || xs[0] <= 0.0 {
        return Err(invalid("xs", "need at least two strictly increasing positive rungs"));
    }
    if paths < 2 {
        return Err(invalid("paths", "need at least two samples per rung"));
    }
    let d = law.params().d();
    let g = law.params().g();
    let mut accumulators = Vec::with_capacity(xs.len());
    for (i, &x) in xs.iter().enumerate() {
        let h = law.profile().value(-x);
        let fx = lamperti(c, lambda, x);
        let v0 = (2.0 * g * x).sqrt();
        let draws = par_streams(derive_seed(seed, i as u64), paths, |_, r| -> Result<[f64; 4]> {
            let u = sample_direction(d, r);
            let u_d = *u.last().expect("nonempty direction");
            let fl = ParabolicFlight::new(-x, u, law.params())?;
            let t = law.sample_flight_time(&fl, r)?;
            // X_1 - x = -(v0 u_d t - g t^2 / 2)
            let dx = -(v0 * u_d * t - 0.5 * g * t * t);
            let x1 = x + dx;
            let df = lamperti(c, lambda, x1) - fx;
            Ok([x * h * h * dx, h * h * dx * dx, fx * df, df * df])
        });
        let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;
        let mut acc = [MomentAccumulator::new(); 4];
        for v in &draws {
            for (a, x) in acc.iter_mut().zip(v) {
                a.push(*x);
            }
        }
        accumulators.push(acc);
    }
    let ladder = |t: OneStepTargets| -> [LadderReport; 4] {
        let tv = [t.drift, t.variance, t.lamperti_drift, t.lamperti_variance];
        std::array::from_fn(|j| {
            let rungs = xs
                .iter()
                .zip(&accumulators)
                .map(|(&x, acc)| LadderRung {
                    rung: x,
                    statistic: acc[j].mean(),
                    target: tv[j],
                    se: acc[j].std_error(),
                })
                .collect();
            LadderReport::new(ONE_STEP_LABELS[j], rungs, k_se)
        })
    };
    Ok(OneStepScan {
        d,
        lambda,
        xs: xs.to_vec(),
        paths,
        published: ladder(OneStepTargets::published(d, lambda)),
        exact: ladder(OneStepTargets::exact(d, lambda)),
        accumulators,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecurrenceSpec {
    /// Return level `L < 0`.
    pub level: f64,
    /// First-drop depths as multiples of `L`, each > 1.
    pub drop_factors: Vec<f64>,
    /// Increasing horizons: events allowed after the first drop. The largest
    /// also caps the wait for the drop itself.
    pub horizons: Vec<u64>,
    pub trials: usize,
    /// Paths and length for the growth exponent of `|Y_m|`.
    pub growth_paths: usize,
    pub growth_events: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReturnFraction {
    pub factor: f64,
    pub dropped: u64,
    pub returned: u64,
    /// Fraction returned within each horizon, with its standard error.
    pub by_horizon: Vec<HorizonFraction>,
    /// Mean events from the drop to the return, over returning trials.
    pub mean_return_events: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HorizonFraction {
    pub horizon: u64,
    pub fraction: f64,
    pub se: f64,
}

impl ReturnFraction {
    /// The fraction at the largest horizon.
    pub fn last(&self) -> HorizonFraction {
        *self.by_horizon.last().expect("at least one horizon")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecurrenceScan {
    pub d: usize,
    pub lambda: f64,
    pub fractions: Vec<ReturnFraction>,
    pub growth_exponent: f64,
    pub growth_target: f64,
    pub total_events: u64,
}

#[derive(Clone, Copy, Default)]
struct FactorState {
    drop_at: Option<u64>,
    returned_after: Option<u64>,
    resolved: bool,
}

/// Return fractions after first drops to `factor * L`, one trajectory from 0
/// serving all factors, plus the slope of `log median |Y_m|` against `log m`.
pub fn recurrence_scan(law: &ScatterLaw, spec: &RecurrenceSpec, seed: u64) -> Result<RecurrenceScan> {
    let (_, lambda) = power_law_parts(law)?;
    if !(spec.level < 0.0) {
        return Err(invalid("level", "return level must be negative"));
    }
    if spec.drop_factors.is_empty() || spec.drop_factors.iter().any(|f| !(*f > 1.0)) {
        return Err(invalid("drop_factors", "need factors > 1"));
    }
    if spec.trials == 0 {
        return Err(invalid("trials", "need at least one trial"));
    }
    if spec.horizons.is_empty() || spec.horizons[0] == 0 || spec.horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("horizons", "need strictly increasing positive horizons"));
    }
    let horizon = *spec.horizons.last().unwrap();
    let nf = spec.drop_factors.len();
    let runs = par_streams(derive_seed(seed, 0), spec.trials, |_, r| -> Result<(Vec<FactorState>, u64)> {
        let mut st = vec![FactorState::default(); nf];
        let cap = 2 * horizon;
        let mut chain = SkeletonChain::new(law, 0.0, StoppingSpec::events(cap), &mut *r)?;
        let mut events = 0;
        for rec in chain.by_ref() {
            let rec = rec?;
            events = rec.m;
            for (s, &f) in st.iter_mut().zip(&spec.drop_factors) {
                if s.resolved {
                    continue;
                }
                match s.drop_at {
                    None => {
                        if rec.y < f * spec.level {
                            s.drop_at = Some(rec.m);
                        } else if rec.m >= horizon {
                            s.resolved = true;
                        }
                    }
                    Some(m0) => {
                        if rec.y >= spec.level {
                            s.returned_after = Some(rec.m - m0);
                            s.resolved = true;
                        } else if rec.m - m0 >= horizon {
                            s.resolved = true;
                        }
                    }
                }
            }
            if st.iter().all(|s| s.resolved) {
                break;
            }
        }
        Ok((st, events))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut total_events = 0;
    let mut fractions = Vec::with_capacity(nf);
    for (j, &f) in spec.drop_factors.iter().enumerate() {
        let mut dropped = 0;
        let mut waits = Vec::new();
        for (st, _) in &runs {
            if st[j].drop_at.is_some() {
                dropped += 1;
                if let Some(w) = st[j].returned_after {
                    waits.push(w);
                }
            }
        }
        let by_horizon = spec
            .horizons
            .iter()
            .map(|&h| {
                let (fraction, se) = proportion(waits.iter().filter(|&&w| w <= h).count() as u64, dropped);
                HorizonFraction { horizon: h, fraction, se }
            })
            .collect();
        let returned = waits.len() as u64;
        let mean_return_events =
            if returned > 0 { waits.iter().map(|&w| w as f64).sum::<f64>() / returned as f64 } else { f64::NAN };
        fractions.push(ReturnFraction { factor: f, dropped, returned, by_horizon, mean_return_events });
    }
    for (_, e) in &runs {
        total_events += e;
    }
    let (growth_exponent, growth_events) =
        growth_exponent(law, spec.growth_paths, spec.growth_events, derive_seed(seed, 1))?;
    total_events += growth_events;
    Ok(RecurrenceScan {
        d: law.params().d(),
        lambda,
        fractions,
        growth_exponent,
        growth_target: 1.0 / (2.0 + 2.0 * lambda),
        total_events,
    })
}

/// Slope of `log median |Y_m|` against `log m` over `m = 2^k` in the upper
/// half of the dyadic range.
fn growth_exponent(law: &ScatterLaw, paths: usize, events: u64, seed: u64) -> Result<(f64, u64)> {
    if paths == 0 || events < 64 {
        return Ok((f64::NAN, 0));
    }
    let kmax = 63 - events.leading_zeros() as usize;
    let marks: Vec<u64> = (0..=kmax).map(|k| 1u64 << k).collect();
    let runs = par_streams(seed, paths, |_, r| -> Result<Vec<f64>> {
        let chain = SkeletonChain::new(law, 0.0, StoppingSpec::events(*marks.last().unwrap()), &mut *r)?;
        let mut out = Vec::with_capacity(marks.len());
        let mut next = 0;
        for rec in chain {
            let rec = rec?;
            if next < marks.len() && rec.m == marks[next] {
                out.push(-rec.y);
                next += 1;
            }
        }
        Ok(out)
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let lo = kmax / 2;
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (k, &m) in marks.iter().enumerate().skip(lo) {
        let col: Vec<f64> = runs.iter().map(|p| p[k]).collect();
        lx.push((m as f64).ln());
        ly.push(super::median(&col).ln());
    }
    Ok((ols_slope(&lx, &ly), paths as u64 * marks[kmax]))
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginalRung {
    pub n: u64,
    pub ks: KsResult,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceScan {
    pub d: usize,
    pub lambda: f64,
    pub t: f64,
    pub map: BesselMapSummary,
    pub rungs: Vec<MarginalRung>,
    /// KS statistics strictly decrease along the ladder.
    pub decreasing: bool,
    /// Scaled samples at the top rung and the reference sample.
    #[serde(skip)]
    pub top_samples: Vec<f64>,
    #[serde(skip)]
    pub reference: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BesselMapSummary {
    pub delta: f64,
    pub coef: f64,
    pub power: f64,
    pub clock: f64,
}

impl From<BesselMap> for BesselMapSummary {
    fn from(m: BesselMap) -> Self {
        BesselMapSummary { delta: m.delta, coef: m.coef, power: m.power, clock: m.clock }
    }
}

/// Samples of the mapped Bessel marginal at time `t`, started from 0.
pub fn bessel_reference<R: Rng + ?Sized>(map: &BesselMap, t: f64, count: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !map.sampleable {
        return Err(crate::error::Error::NotSampleable { delta: map.delta });
    }
    let gamma = rand_distr::Gamma::new(0.5 * map.delta, 1.0).map_err(|e| invalid("delta", e.to_string()))?;
    Ok((0..count)
        .map(|_| {
            let g: f64 = rand_distr::Distribution::sample(&gamma, rng);
            map.to_depth((2.0 * map.clock * t * g).sqrt())
        })
        .collect())
}

/// Reference draws per chain path in the marginal tests. Reference draws are
/// exact Gamma variates and cheap, and one reference is shared by all rungs.
pub const REFERENCE_FACTOR: usize = 10;

/// Two-sample KS between `n^(-1/(2+2l)) Y_[n t]` from 0 and the mapped Bessel
/// marginal, one rung per `n`.
pub fn invariance_marginal_test(
    law: &ScatterLaw,
    kind: LimitKind,
    t: f64,
    ns: &[u64],
    paths: usize,
    alpha: f64,
    seed: u64,
) -> Result<InvarianceScan> {
    let (c, lambda) = power_law_parts(law)?;
    if !(t >= 0.0) {
        return Err(invalid("t", "must be nonnegative"));
    }
    if ns.is_empty() || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("ns", "need a strictly increasing ladder"));
    }
    let d = law.params().d();
    let map = bessel_map(lambda, d, kind, c, law.params().g());
    let mut rref = crate::rng::substream(derive_seed(seed, 0xbe55e1), 0);
    let reference = bessel_reference(&map, t, paths * REFERENCE_FACTOR, &mut rref)?;
    let mut rungs = Vec::with_capacity(ns.len());
    let mut top = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let steps = (n as f64 * t).floor() as u64;
        let scale = (n as f64).powf(1.0 / (2.0 + 2.0 * lambda));
        let ys = par_streams(derive_seed(seed, i as u64 + 1), paths, |_, r: &mut Stream| -> Result<f64> {
            let mut y = 0.0;
            for rec in SkeletonChain::new(law, 0.0, StoppingSpec::events(steps), &mut *r)? {
                y = rec?.y;
            }
            Ok(y / scale)
        });
        let ys = ys.into_iter().collect::<Result<Vec<_>>>()?;
        let ks = if steps == 0 {
            // both marginals sit at the start
            let n_eff = (paths * reference.len()) as f64 / (paths + reference.len()) as f64;
            KsResult { statistic: 0.0, critical: super::ks_critical(alpha, n_eff), n_eff, pass: true }
        } else {
            ks_two_sample(&ys, &reference, alpha)?
        };
        rungs.push(MarginalRung { n, ks });
        top = ys;
    }
    let decreasing = rungs.windows(2).all(|w| w[1].ks.statistic < w[0].ks.statistic);
    Ok(InvarianceScan { d, lambda, t, map: map.into(), rungs, decreasing, top_samples: top, reference })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HazardIdentity {
    pub y: f64,
    pub u_d: f64,
    pub mean_f: f64,
    pub se_f: f64,
    pub mean_f2: f64,
    pub se_f2: f64,
}

/// `E[F(N)]` and `E[F(N)^2]` with `F` recomputed by quadrature at the sampled
/// flight time (1 and 2 for an exact sampler).
pub fn hazard_identities(law: &ScatterLaw, y: f64, u_d: f64, samples: usize, seed: u64) -> Result<HazardIdentity> {
    let fl = law.flight_vertical(y, u_d)?;
    let fs = par_streams(seed, samples, |_, r| -> Result<f64> {
        let t = law.sample_flight_time(&fl, r)?;
        Ok(law.cumulative_hazard(&fl, t))
    });
    let fs = fs.into_iter().collect::<Result<Vec<_>>>()?;
    let a: MomentAccumulator = fs.iter().copied().collect();
    let b: MomentAccumulator = fs.iter().map(|f| f * f).collect();
    Ok(HazardIdentity { y, u_d, mean_f: a.mean(), se_f: a.std_error(), mean_f2: b.mean(), se_f2: b.std_error() })
}

/// Convenience: the unrescaled law for `h = c |y|^l` in dimension `d`.
pub fn power_law_chain(c: f64, lambda: f64, d: usize, g: f64) -> Result<ScatterLaw> {
    Ok(ScatterLaw::raw(DensityProfile::power_law(c, lambda)?, FlightParams::new(g, d)?))
}
