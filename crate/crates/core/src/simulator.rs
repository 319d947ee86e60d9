//! The collision chain (skeleton), the continuous path between collisions,
//! scaling regimes, stopping rules and the time-change functionals.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use smallvec::smallvec;

use crate::density::{pow_fast, DensityProfile};
use crate::dynamics::{downward, Direction, ParabolicFlight};
use crate::error::{invalid, Error, Result};
use crate::scattering::ScatterLaw;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalingRegime {
    Raw,
    /// Gravity g/sqrt(n) and density sqrt(n) h; the chain is read at skeleton
    /// time n and physical time n^(3/4).
    RescaledDynamics {
        n: f64,
    },
    /// Unrescaled power-law dynamics observed in space n^(1/(2+2l)) and
    /// physical time n^((3+2l)/(4+4l)).
    PowerLawWindow {
        n: f64,
    },
}

impl ScalingRegime {
    pub fn index(&self) -> f64 {
        match *self {
            ScalingRegime::Raw => 1.0,
            ScalingRegime::RescaledDynamics { n } | ScalingRegime::PowerLawWindow { n } => n,
        }
    }

    pub(crate) fn validate(&self, profile: &DensityProfile) -> Result<()> {
        let n = self.index();
        if !(n >= 1.0 && n.is_finite()) {
            return Err(invalid("n", format!("scaling index must be >= 1, got {n}")));
        }
        if let ScalingRegime::PowerLawWindow { .. } = self {
            if profile.exponent().is_none() {
                return Err(invalid("regime", "the power-law window needs a power-law density"));
            }
        }
        Ok(())
    }

    /// Factor dividing depths to obtain the scaled process.
    pub fn space_factor(&self, lambda: f64) -> f64 {
        match *self {
            ScalingRegime::Raw | ScalingRegime::RescaledDynamics { .. } => 1.0,
            ScalingRegime::PowerLawWindow { n } => n.powf(1.0 / (2.0 + 2.0 * lambda)),
        }
    }

    /// Number of collisions per unit of scaled skeleton time.
    pub fn skeleton_clock(&self) -> f64 {
        self.index()
    }

    /// Factor dividing physical time to obtain the scaled clock.
    pub fn time_factor(&self, lambda: f64) -> f64 {
        match *self {
            ScalingRegime::Raw => 1.0,
            ScalingRegime::RescaledDynamics { n } => n.powf(0.75),
            ScalingRegime::PowerLawWindow { n } => n.powf((3.0 + 2.0 * lambda) / (4.0 + 4.0 * lambda)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkeletonRecord {
    pub m: u64,
    /// Depth at the m-th collision.
    pub y: f64,
    /// Duration of the flight that ended here (0 for the start).
    pub dt: f64,
    /// Cumulative clock.
    pub t: f64,
    /// Direction of the flight leaving this collision.
    #[serde(skip)]
    pub u: Direction,
}

impl SkeletonRecord {
    pub fn u_d(&self) -> f64 {
        *self.u.last().expect("direction has at least one coordinate")
    }
}

/// Stopping rule. Levels are in scaled units and multiplied by the regime's
/// space factor. The upper level is only armed once the lower level has been
/// crossed, when a lower level is present.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StoppingSpec {
    pub max_events: u64,
    pub max_clock: Option<f64>,
    pub upper_level: Option<f64>,
    pub lower_level: Option<f64>,
}

impl StoppingSpec {
    pub fn events(max_events: u64) -> Self {
        StoppingSpec { max_events, max_clock: None, upper_level: None, lower_level: None }
    }

    pub fn with_upper(mut self, v: f64) -> Self {
        self.upper_level = Some(v);
        self
    }

    pub fn with_lower(mut self, z: f64) -> Self {
        self.lower_level = Some(z);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self.upper_level {
            if !(v < 0.0) {
                return Err(invalid("v", format!("upper level must be negative, got {v}")));
            }
        }
        if let (Some(z), Some(v)) = (self.lower_level, self.upper_level) {
            if !(z < v) {
                return Err(invalid("z", format!("lower level {z} must lie below upper level {v}")));
            }
        }
        if let Some(c) = self.max_clock {
            if !(c >= 0.0) {
                return Err(invalid("max_clock", "must be nonnegative"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StopReason {
    MaxEvents,
    MaxClock,
    UpperLevel,
}

/// Uniform direction on the unit sphere; `±1` with equal odds in d = 1.
pub fn sample_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Direction {
    if d == 1 {
        return if rng.random::<bool>() { smallvec![1.0] } else { smallvec![-1.0] };
    }
    loop {
        let mut u: Direction = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n2: f64 = u.iter().map(|x| x * x).sum();
        if n2 > 1e-300 {
            let inv = 1.0 / n2.sqrt();
            u.iter_mut().for_each(|x| *x *= inv);
            return u;
        }
    }
}

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Streaming skeleton chain; yields the start record and then one record per
/// collision until the stopping rule fires.
pub struct SkeletonChain<'a, R: Rng> {
    law: &'a ScatterLaw,
    rng: R,
    stopping: StoppingSpec,
    upper: Option<f64>,
    lower: Option<f64>,
    armed: bool,
    y: f64,
    u: Option<Direction>,
    clock: Compensated,
    m: u64,
    done: bool,
    stop: Option<StopReason>,
}

impl<'a, R: Rng> SkeletonChain<'a, R> {
    pub fn new(law: &'a ScatterLaw, y_init: f64, stopping: StoppingSpec, rng: R) -> Result<Self> {
        if !(y_init <= 0.0) {
            return Err(Error::Domain { what: "a chain start", y: y_init });
        }
        stopping.validate()?;
        let factor = law.regime().space_factor(law.base_profile().exponent().unwrap_or(0.0));
        Ok(SkeletonChain {
            law,
            rng,
            stopping,
            upper: stopping.upper_level.map(|v| v * factor),
            lower: stopping.lower_level.map(|z| z * factor),
            armed: stopping.lower_level.is_none(),
            y: y_init,
            u: None,
            clock: Compensated::default(),
            m: 0,
            done: false,
            stop: None,
        })
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    fn draw_direction(&mut self) -> Direction {
        let d = self.law.params().d();
        if self.y == 0.0 {
            // no energy at depth 0: the only way is down
            return downward(d);
        }
        sample_direction(d, &mut self.rng)
    }

    fn step(&mut self) -> Result<SkeletonRecord> {
        let mut dt = 0.0;
        if self.m > 0 || self.u.is_some() {
            let u = self.u.take().expect("direction drawn with the previous record");
            let fl = ParabolicFlight::from_parts(self.y, u, self.law.params());
            dt = self.law.sample_flight_time(&fl, &mut self.rng)?;
            self.y = fl.depth(dt);
            self.clock.add(dt);
            self.m += 1;
        }
        let u = self.draw_direction();
        self.u = Some(u.clone());
        Ok(SkeletonRecord { m: self.m, y: self.y, dt, t: self.clock.value(), u })
    }

    fn should_stop(&mut self, rec: &SkeletonRecord) -> Option<StopReason> {
        if !self.armed {
            if let Some(z) = self.lower {
                if rec.y < z {
                    self.armed = true;
                }
            }
        } else if let Some(v) = self.upper {
            if rec.y >= v {
                return Some(StopReason::UpperLevel);
            }
        }
        if rec.m >= self.stopping.max_events {
            return Some(StopReason::MaxEvents);
        }
        if let Some(c) = self.stopping.max_clock {
            if rec.t >= c {
                return Some(StopReason::MaxClock);
            }
        }
        None
    }
}

impl<R: Rng> Iterator for SkeletonChain<'_, R> {
    type Item = Result<SkeletonRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.step() {
            Ok(rec) => {
                if let Some(reason) = self.should_stop(&rec) {
                    self.done = true;
                    self.stop = Some(reason);
                }
                Some(Ok(rec))
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Skeleton {
    pub records: Vec<SkeletonRecord>,
    pub stop: StopReason,
    /// Index of the first record below the lower level, if one was given.
    pub window_start: Option<usize>,
}

/// Runs the chain to completion and keeps every record.
pub fn run_skeleton<R: Rng>(law: &ScatterLaw, y_init: f64, stopping: StoppingSpec, rng: R) -> Result<Skeleton> {
    let factor = law.regime().space_factor(law.base_profile().exponent().unwrap_or(0.0));
    let z = stopping.lower_level.map(|z| z * factor);
    let mut chain = SkeletonChain::new(law, y_init, stopping, rng)?;
    let mut records = Vec::new();
    let mut window_start = None;
    for rec in chain.by_ref() {
        let rec = rec?;
        if window_start.is_none() {
            if let Some(z) = z {
                if rec.y < z {
                    window_start = Some(records.len());
                }
            }
        }
        records.push(rec);
    }
    let stop = chain.stop_reason().expect("chain ended without a reason");
    Ok(Skeleton { records, stop, window_start })
}

/// Depth of the continuous path at clock `t`.
pub fn full_path_eval(law: &ScatterLaw, records: &[SkeletonRecord], t: f64) -> Result<f64> {
    let end = records.last().map_or(0.0, |r| r.t);
    if records.is_empty() || !(t >= 0.0 && t <= end) {
        return Err(Error::OutOfRange { t, end });
    }
    // first record with clock > t; the flight starts at the one before
    let k = records.partition_point(|r| r.t <= t);
    if k == records.len() {
        return Ok(records[k - 1].y);
    }
    let start = &records[k - 1];
    let fl = ParabolicFlight::from_parts(start.y, start.u.clone(), law.params());
    Ok(fl.depth(t - start.t))
}

/// Samples the continuous path at every collision plus `refine` interior
/// points per flight.
pub fn sample_path(law: &ScatterLaw, records: &[SkeletonRecord], refine: usize) -> (Vec<f64>, Vec<f64>) {
    let mut ts = Vec::with_capacity(records.len() * (refine + 1));
    let mut ys = Vec::with_capacity(ts.capacity());
    for w in records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        ts.push(a.t);
        ys.push(a.y);
        let fl = ParabolicFlight::from_parts(a.y, a.u.clone(), law.params());
        for j in 1..=refine {
            let s = b.dt * j as f64 / (refine + 1) as f64;
            ts.push(a.t + s);
            ys.push(fl.depth(s));
        }
    }
    if let Some(r) = records.last() {
        ts.push(r.t);
        ys.push(r.y);
    }
    (ts, ys)
}

/// Collision rate of the unscaled law at depth `y`: `1 / (sqrt(2g|y|) h(y))` is
/// the mean flight time in the limit.
fn clock_integrand(profile: &DensityProfile, g: f64, y: f64) -> f64 {
    1.0 / ((2.0 * g * -y).sqrt() * profile.value(y))
}

/// `psi_v` of the step path `s -> ys[floor(n s)]` on the grid `s_k = k / n`,
/// `k = 0..=len`. Depths are capped at `v` before integration.
pub fn psi_v_step(profile: &DensityProfile, g: f64, ys: &[f64], n: f64, v: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(ys.len() + 1);
    let mut acc = Compensated::default();
    out.push(0.0);
    for &y in ys {
        acc.add(clock_integrand(profile, g, y.min(v)) / n);
        out.push(acc.value());
    }
    out
}

/// `psi_v` of a piecewise linear path by the trapezoid rule.
pub fn psi_v_linear(profile: &DensityProfile, g: f64, s: &[f64], ys: &[f64], v: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(s.len());
    let mut acc = Compensated::default();
    out.push(0.0);
    for k in 1..s.len() {
        let a = clock_integrand(profile, g, ys[k - 1].min(v));
        let b = clock_integrand(profile, g, ys[k].min(v));
        acc.add(0.5 * (a + b) * (s[k] - s[k - 1]));
        out.push(acc.value());
    }
    out
}

/// The scaled clock `n^(-3/4) T_{(n s) ∧ tau}` plus the linear continuation
/// after the stopping index `tau`, evaluated at `s_k = k / n` for `k = 0..=k_max`.
/// Records must start at index 0 and end at `tau` or earlier.
pub fn clock_profile(law: &ScatterLaw, records: &[SkeletonRecord], v: f64, k_max: usize) -> Vec<f64> {
    let lambda = law.base_profile().exponent().unwrap_or(0.0);
    let n = law.regime().skeleton_clock();
    let tf = law.regime().time_factor(lambda);
    let slope = clock_integrand(law.base_profile(), law.base_params().g(), v);
    let last = records.len() - 1;
    (0..=k_max)
        .map(|k| if k <= last { records[k].t / tf } else { records[last].t / tf + (k - last) as f64 / n * slope })
        .collect()
}

/// Sup over the grid of the difference between the scaled clock and `psi_v`
/// of the stopped step path.
pub fn clock_sup_difference(law: &ScatterLaw, records: &[SkeletonRecord], v: f64, k_max: usize) -> f64 {
    let n = law.regime().skeleton_clock();
    let ys: Vec<f64> = (0..k_max).map(|k| records.get(k).map_or(v, |r| r.y)).collect();
    let psi = psi_v_step(law.base_profile(), law.base_params().g(), &ys, n, v);
    let clock = clock_profile(law, records, v, k_max);
    clock.iter().zip(&psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// How a sampled function is interpolated between grid points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interp {
    /// `f = f_i` on `[s_i, s_{i+1})`, and `f_last` beyond the last point.
    Step,
    /// Linear between samples, constant beyond the last point.
    Linear,
}

/// `Psi(f)(t) = inf { s : f(s) > t }` for nondecreasing samples, with
/// `inf {} = +inf`.
pub fn right_continuous_inverse(s: &[f64], f: &[f64], interp: Interp, queries: &[f64]) -> Vec<f64> {
    assert_eq!(s.len(), f.len());
    queries
        .iter()
        .map(|&t| {
            let i = f.partition_point(|&x| x <= t);
            if i == f.len() {
                return f64::INFINITY;
            }
            match interp {
                Interp::Step => s[i],
                Interp::Linear => {
                    if i == 0 {
                        return s[0];
                    }
                    // f[i-1] <= t < f[i]
                    let w = (t - f[i - 1]) / (f[i] - f[i - 1]);
                    s[i - 1] + w * (s[i] - s[i - 1])
                }
            }
        })
        .collect()
}

/// `Phi_eps(f)_t = ∫ 1(f <= -eps) / (c sqrt(2g) |f|^(l + 1/2)) ds` by the
/// trapezoid rule. Points where the path sits exactly at 0 contribute 0.
pub fn occupation_clock(s: &[f64], ys: &[f64], eps: f64, lambda: f64, c: f64, g: f64) -> Vec<f64> {
    let k = c * (2.0 * g).sqrt();
    let w = |y: f64| {
        if y <= -eps && y < 0.0 {
            1.0 / (k * pow_fast(-y, lambda + 0.5))
        } else {
            0.0
        }
    };
    let mut out = Vec::with_capacity(s.len());
    let mut acc = Compensated::default();
    out.push(0.0);
    for i in 1..s.len() {
        acc.add(0.5 * (w(ys[i - 1]) + w(ys[i])) * (s[i] - s[i - 1]));
        out.push(acc.value());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::FlightParams;
    use crate::rng::substream;

    fn law(profile: DensityProfile, g: f64, d: usize, regime: ScalingRegime) -> ScatterLaw {
        ScatterLaw::new(profile, FlightParams::new(g, d).unwrap(), regime).unwrap()
    }

    #[test]
    fn direction_moments() {
        let mut r = substream(1, 0);
        let ups = (0..10_000).filter(|_| sample_direction(1, &mut r)[0] > 0.0).count();
        assert!((ups as f64 / 1e4 - 0.5).abs() < 0.015);
        for (d, target) in [(2, 0.5), (5, 0.2)] {
            let m: f64 = (0..10_000).map(|_| sample_direction(d, &mut r)[d - 1].powi(2)).sum::<f64>() / 1e4;
            assert!((m - target).abs() < 0.01, "d={d}: {m}");
        }
    }

    #[test]
    fn single_event_is_reproducible() {
        let l = law(DensityProfile::constant(1.0).unwrap(), 1.0, 2, ScalingRegime::Raw);
        let a = run_skeleton(&l, -1.0, StoppingSpec::events(1), substream(3, 0)).unwrap();
        let b = run_skeleton(&l, -1.0, StoppingSpec::events(1), substream(3, 0)).unwrap();
        assert_eq!(a.records.len(), 2);
        assert_eq!(a.records, b.records);
        let r0 = &a.records[0];
        let fl = l.flight(r0.y, r0.u.clone()).unwrap();
        assert_eq!(a.records[1].y, fl.depth(a.records[1].dt));
    }

    #[test]
    fn start_at_zero_falls_straight_down() {
        let l = law(DensityProfile::power_law(1.0, 1.0).unwrap(), 1.0, 3, ScalingRegime::Raw);
        let s = run_skeleton(&l, 0.0, StoppingSpec::events(3), substream(4, 0)).unwrap();
        assert_eq!(s.records[0].u.as_slice(), &[0.0, 0.0, -1.0]);
        assert!(s.records.iter().all(|r| r.y <= 0.0));
    }

    #[test]
    fn path_interpolation_hits_knots() {
        let l = law(DensityProfile::constant(1.0).unwrap(), 2.0, 2, ScalingRegime::Raw);
        let s = run_skeleton(&l, -2.0, StoppingSpec::events(50), substream(2, 0)).unwrap();
        for w in s.records.windows(2) {
            assert!((full_path_eval(&l, &s.records, w[1].t).unwrap() - w[1].y).abs() < 1e-9);
            assert_eq!(full_path_eval(&l, &s.records, w[0].t).unwrap(), w[0].y);
        }
        let end = s.records.last().unwrap().t;
        assert!(full_path_eval(&l, &s.records, end * 1.01).is_err());
    }

    #[test]
    fn path_midpoint_matches_flight() {
        let l = law(DensityProfile::constant(1.0).unwrap(), 2.0, 2, ScalingRegime::Raw);
        let recs = vec![
            SkeletonRecord { m: 0, y: -2.0, dt: 0.0, t: 0.0, u: smallvec![0.0, -1.0] },
            SkeletonRecord {
                m: 1,
                y: l.flight_vertical(-2.0, -1.0).unwrap().depth(0.4),
                dt: 0.4,
                t: 0.4,
                u: smallvec![1.0, 0.0],
            },
        ];
        let mid = full_path_eval(&l, &recs, 0.2).unwrap();
        assert_eq!(mid, l.flight_vertical(-2.0, -1.0).unwrap().depth(0.2));
    }

    #[test]
    fn upper_level_stops_the_chain() {
        let l = law(DensityProfile::constant(1.0).unwrap(), 1.0, 2, ScalingRegime::RescaledDynamics { n: 100.0 });
        let stop = StoppingSpec::events(1_000_000).with_upper(-0.5);
        let s = run_skeleton(&l, -1.0, stop, substream(8, 0)).unwrap();
        assert_eq!(s.stop, StopReason::UpperLevel);
        assert!(s.records.last().unwrap().y >= -0.5);
        assert!(s.records[..s.records.len() - 1].iter().all(|r| r.y < -0.5));
    }

    #[test]
    fn lower_level_arms_the_upper_one() {
        let l = law(DensityProfile::power_law(1.0, 0.0).unwrap(), 1.0, 1, ScalingRegime::PowerLawWindow { n: 4.0 });
        let stop = StoppingSpec::events(100_000).with_lower(-3.0).with_upper(-1.0);
        let s = run_skeleton(&l, 0.0, stop, substream(6, 0)).unwrap();
        let w = s.window_start.unwrap();
        // space factor is sqrt(4) = 2 for lambda = 0
        assert!(s.records[w].y < -6.0);
        assert!(s.records[..w].iter().all(|r| r.y >= -6.0));
        if s.stop == StopReason::UpperLevel {
            assert!(s.records.last().unwrap().y >= -2.0);
        }
    }

    #[test]
    fn psi_of_constant_path() {
        let p = DensityProfile::constant(2.0).unwrap();
        let ys = vec![-3.0; 10];
        let psi = psi_v_step(&p, 0.5, &ys, 10.0, -0.5);
        let expected = 1.0 / (3f64.sqrt() * 2.0);
        assert!((psi[10] - expected).abs() < 1e-14);
        let lin = psi_v_linear(&p, 0.5, &[0.0, 0.4, 1.0], &[-3.0, -3.0, -3.0], -0.5);
        assert!((lin[2] - expected).abs() < 1e-14);
    }

    #[test]
    fn clock_continuation_slope() {
        let l = law(DensityProfile::constant(1.0).unwrap(), 0.5, 2, ScalingRegime::RescaledDynamics { n: 100.0 });
        let stop = StoppingSpec::events(1_000_000).with_upper(-0.25);
        let s = run_skeleton(&l, -0.3, stop, substream(1, 7)).unwrap();
        let tau = s.records.len() - 1;
        let c = clock_profile(&l, &s.records, -0.25, tau + 10);
        let slope = (c[tau + 10] - c[tau + 9]) * 100.0;
        assert!((slope - 1.0 / (0.25f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn inverse_examples() {
        let s: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let f: Vec<f64> = s.iter().map(|x| 2.0 * x).collect();
        let q = right_continuous_inverse(&s, &f, Interp::Linear, &[0.0, 0.5, 1.3, 2.0, 2.5]);
        assert!((q[1] - 0.25).abs() < 1e-15 && (q[2] - 0.65).abs() < 1e-15);
        assert_eq!(q[3], f64::INFINITY);
        let q = right_continuous_inverse(&[0.0, 1.0], &[0.0, 3.0], Interp::Step, &[0.0, 1.5, 2.999, 3.0, 4.0]);
        assert_eq!(q, vec![1.0, 1.0, 1.0, f64::INFINITY, f64::INFINITY]);
    }

    #[test]
    fn occupation_clock_examples() {
        let s = [0.0, 0.5, 1.0, 2.0];
        let phi = occupation_clock(&s, &[-1.0; 4], 0.5, 0.0, 1.0, 0.5);
        assert!((phi[3] - 2.0).abs() < 1e-15);
        let zero = occupation_clock(&s, &[-0.2, -0.1, -0.3, 0.0], 0.5, 0.0, 1.0, 0.5);
        assert!(zero.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn clock_is_compensated_sum() {
        let l = law(DensityProfile::constant(1.0).unwrap(), 1.0, 2, ScalingRegime::Raw);
        let s = run_skeleton(&l, -5.0, StoppingSpec::events(20_000), substream(12, 0)).unwrap();
        let mut naive = Compensated::default();
        for r in &s.records {
            naive.add(r.dt);
        }
        let t = s.records.last().unwrap().t;
        assert!((t - naive.value()).abs() <= 1e-12 * t);
        assert!(s.records.windows(2).all(|w| w[1].t > w[0].t));
    }
}
