//! Collision law along a flight: intensity, hazard, survival, exact sampling
//! of the flight time by hazard inversion, and deterministic moment oracles.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::density::{DensityKind, DensityProfile};
use crate::dynamics::{Direction, FlightParams, ParabolicFlight};
use crate::error::{invalid, Error, Result};
use crate::quadrature::Adaptive;
use crate::simulator::ScalingRegime;

/// Hazard level at which survival is below 1e-16; moment integrals stop there.
const TAIL_HAZARD: f64 = 40.0;

#[derive(Clone, Debug)]
pub struct ScatterLaw {
    base_profile: DensityProfile,
    base_params: FlightParams,
    regime: ScalingRegime,
    profile: DensityProfile,
    params: FlightParams,
    quad: Adaptive,
}

impl ScatterLaw {
    pub fn new(profile: DensityProfile, params: FlightParams, regime: ScalingRegime) -> Result<Self> {
        regime.validate(&profile)?;
        let (eff_profile, eff_params) = match regime {
            ScalingRegime::RescaledDynamics { n } => (profile.rescale(n)?, params.with_g(params.g() / n.sqrt())),
            _ => (profile.clone(), params),
        };
        Ok(ScatterLaw {
            base_profile: profile,
            base_params: params,
            regime,
            profile: eff_profile,
            params: eff_params,
            quad: Adaptive::new(1e-300, 1e-13),
        })
    }

    pub fn raw(profile: DensityProfile, params: FlightParams) -> Self {
        Self::new(profile, params, ScalingRegime::Raw).expect("raw regime accepts any profile")
    }

    /// Profile and gravity as given, before the regime's rescaling.
    pub fn base_profile(&self) -> &DensityProfile {
        &self.base_profile
    }

    pub fn base_params(&self) -> FlightParams {
        self.base_params
    }

    /// Profile and gravity the particle actually experiences.
    pub fn profile(&self) -> &DensityProfile {
        &self.profile
    }

    pub fn params(&self) -> FlightParams {
        self.params
    }

    pub fn regime(&self) -> ScalingRegime {
        self.regime
    }

    pub fn flight(&self, y0: f64, u: Direction) -> Result<ParabolicFlight> {
        ParabolicFlight::new(y0, u, self.params)
    }

    pub fn flight_vertical(&self, y0: f64, u_d: f64) -> Result<ParabolicFlight> {
        ParabolicFlight::vertical(y0, u_d, self.params)
    }

    fn check(&self, fl: &ParabolicFlight) {
        debug_assert_eq!(fl.params(), self.params, "flight built with foreign gravity");
        let _ = fl;
    }

    #[inline]
    pub fn intensity(&self, fl: &ParabolicFlight, s: f64) -> f64 {
        self.profile.value(fl.depth(s)) * fl.speed(s)
    }

    /// Integral of the intensity over [t1, t2], `t1 <= t2`.
    pub fn hazard_between(&self, fl: &ParabolicFlight, t1: f64, t2: f64) -> f64 {
        if t2 <= t1 {
            return 0.0;
        }
        if let Some(c) = self.flat_amplitude() {
            // differencing is fine here: callers needing tiny windows use the generic path
            return c * (fl.arc_length(t2) - fl.arc_length(t1));
        }
        let f = |s: f64| self.intensity(fl, s);
        match fl.apex_time() {
            Some(ta) if ta > t1 && ta < t2 => self.quad.integrate(f, &[t1, ta, t2]).value,
            _ => self.quad.integrate(f, &[t1, t2]).value,
        }
    }

    fn flat_amplitude(&self) -> Option<f64> {
        if self.profile.is_flat() {
            self.profile.amplitude()
        } else {
            None
        }
    }

    pub fn cumulative_hazard(&self, fl: &ParabolicFlight, t: f64) -> f64 {
        self.check(fl);
        if let Some(c) = self.flat_amplitude() {
            return c * fl.arc_length(t);
        }
        self.hazard_between(fl, 0.0, t)
    }

    pub fn survival(&self, fl: &ParabolicFlight, t: f64) -> f64 {
        (-self.cumulative_hazard(fl, t)).exp()
    }

    /// Characteristic time to accumulate hazard `e`, used to seed root finding.
    fn time_scale(&self, fl: &ParabolicFlight, e: f64) -> f64 {
        let rate = self.intensity(fl, 0.0);
        if rate > 0.0 {
            return e / rate;
        }
        // start at rest at depth 0 under a power law: F(t) = c g^(l+1) t^(2l+2) / (2^(l+1) (l+1))
        let g = self.params.g();
        if let (Some(c), Some(l)) = (self.profile.amplitude(), self.profile.exponent()) {
            let k = 2f64.powf(l + 1.0) * (l + 1.0) * e / (c * g.powf(l + 1.0));
            return k.powf(1.0 / (2.0 * l + 2.0));
        }
        (2.0 * e / g).sqrt()
    }

    /// The time at which the cumulative hazard reaches `e`.
    pub fn invert_hazard(&self, fl: &ParabolicFlight, e: f64) -> Result<f64> {
        self.check(fl);
        if !(e > 0.0) {
            return Ok(0.0);
        }
        let tol = 1e-11 * e.max(1.0);
        let seed = self.time_scale(fl, e);
        let cap = seed * 2f64.powi(60);
        let flat = self.flat_amplitude();
        let mut lo = (0.0, 0.0);
        let mut hi: Option<(f64, f64)> = None;
        let mut t = seed;
        for _ in 0..500 {
            let f = match (flat, hi) {
                (Some(c), _) => c * fl.arc_length(t),
                // differencing from the upper bracket only when its hazard is comparable to e
                (None, Some(h)) if h.0 - t < t - lo.0 && h.1 <= 2.0 * e.max(1.0) => {
                    h.1 - self.hazard_between(fl, t, h.0)
                }
                (None, _) => lo.1 + self.hazard_between(fl, lo.0, t),
            };
            let r = f - e;
            if r.abs() <= tol {
                return Ok(t);
            }
            if r < 0.0 {
                lo = (t, f);
            } else {
                hi = Some((t, f));
            }
            let rate = self.intensity(fl, t);
            let newton = if rate > 0.0 { t - r / rate } else { f64::NAN };
            t = match hi {
                None => {
                    if t > cap {
                        return Err(Error::BracketCap { target: e, t_max: t });
                    }
                    let grow = 2.0 * t.max(seed);
                    if newton > t {
                        newton.min(grow)
                    } else {
                        grow
                    }
                }
                Some((th, _)) => {
                    if th - lo.0 <= 4.0 * f64::EPSILON * th {
                        return Ok(0.5 * (lo.0 + th));
                    }
                    if newton > lo.0 && newton < th {
                        newton
                    } else {
                        0.5 * (lo.0 + th)
                    }
                }
            };
        }
        Err(Error::NoConvergence(format!("hazard inversion at E = {e}, y0 = {}", fl.y0())))
    }

    /// Draws the flight time N with P(N > t) = survival(t).
    pub fn sample_flight_time<R: Rng + ?Sized>(&self, fl: &ParabolicFlight, rng: &mut R) -> Result<f64> {
        let e: f64 = Exp1.sample(rng);
        self.invert_hazard(fl, e)
    }

    /// Thinning sampler on [0, window]; `None` when no collision occurs there.
    /// Only for profiles nondecreasing in |y|, where the intensity bound is
    /// attained at the window ends.
    pub fn sample_flight_time_thinning<R: Rng + ?Sized>(
        &self,
        fl: &ParabolicFlight,
        window: f64,
        rng: &mut R,
    ) -> Result<Option<f64>> {
        if let DensityKind::Tabulated(_) = self.profile.kind() {
            return Err(Error::Unsupported("thinning needs a monotone profile".into()));
        }
        if !(window > 0.0 && window.is_finite()) {
            return Err(invalid("window", "must be positive and finite"));
        }
        let h_max = self.profile.value(fl.depth(0.0)).max(self.profile.value(fl.depth(window)));
        let bound = h_max * fl.speed(0.0).max(fl.speed(window));
        if bound <= 0.0 {
            return Ok(None);
        }
        let mut t = 0.0;
        loop {
            let e: f64 = Exp1.sample(rng);
            t += e / bound;
            if t > window {
                return Ok(None);
            }
            let accept: f64 = rng.random();
            if accept * bound <= self.intensity(fl, t) {
                return Ok(Some(t));
            }
        }
    }

    /// `E phi(N)` from `phi(0) + integral of phi'(t) P(N > t)`, computed by nested
    /// quadrature. `dphi` is the derivative of phi.
    pub fn expectation<F: Fn(f64) -> f64>(&self, fl: &ParabolicFlight, phi0: f64, dphi: F) -> Result<f64> {
        let t_mid = self.invert_hazard(fl, 1.0)?;
        let t_end = self.invert_hazard(fl, TAIL_HAZARD)?;
        let mut edges: Vec<f64> = (1..=12).rev().map(|k| t_mid * 0.5f64.powi(k)).collect();
        edges.insert(0, 0.0);
        edges.push(t_mid);
        let steps = 12;
        for i in 1..=steps {
            edges.push(t_mid + (t_end - t_mid) * i as f64 / steps as f64);
        }
        if let Some(ta) = fl.apex_time() {
            if ta < t_end {
                edges.push(ta);
            }
        }
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup();
        let panel = Adaptive::new(1e-300, 1e-13);
        let mut total = phi0;
        let mut f_start = 0.0;
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let part = panel.integrate(|t| dphi(t) * (-(f_start + self.hazard_between(fl, a, t))).exp(), &[a, b]);
            total += part.value;
            f_start += self.hazard_between(fl, a, b);
        }
        Ok(total)
    }

    /// `E[N^p]` for the flight from `y` with vertical component `u_d`.
    pub fn moment_oracle(&self, y: f64, u_d: f64, p: u32) -> Result<f64> {
        if p == 0 {
            return Err(invalid("p", "moment order must be >= 1"));
        }
        let fl = self.flight_vertical(y, u_d)?;
        let pf = p as f64;
        self.expectation(&fl, 0.0, |t| pf * t.powi(p as i32 - 1))
    }

    /// `E N(y, u) - E N(y, -u)`.
    pub fn fluctuation_oracle(&self, y: f64, u_d: f64) -> Result<f64> {
        if !(y < 0.0) {
            return Err(Error::Domain { what: "the fluctuation oracle", y });
        }
        Ok(self.moment_oracle(y, u_d, 1)? - self.moment_oracle(y, -u_d, 1)?)
    }

    /// Averages `f(u_d)` over a uniform direction on the sphere. Pairs `u` with
    /// `-u` so that odd parts cancel before summation.
    pub fn sphere_average<F: FnMut(f64) -> Result<f64>>(&self, mut f: F) -> Result<f64> {
        let d = self.params.d();
        if d == 1 {
            return Ok(0.5 * (f(1.0)? + f(-1.0)?));
        }
        // u_d = sin(phi), density proportional to cos(phi)^(d-2) on [-pi/2, pi/2]
        let w = |phi: f64| phi.cos().powi(d as i32 - 2);
        let q = Adaptive::new(1e-300, 1e-12);
        let norm = q.integrate(w, &[0.0, std::f64::consts::FRAC_PI_2]).value;
        let mut err = None;
        let v = q
            .integrate(
                |phi| {
                    let u = phi.sin();
                    match (f(u), f(-u)) {
                        (Ok(a), Ok(b)) => 0.5 * (a + b) * w(phi),
                        (Err(e), _) | (_, Err(e)) => {
                            err = Some(e);
                            0.0
                        }
                    }
                },
                &[0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2],
            )
            .value;
        match err {
            Some(e) => Err(e),
            None => Ok(v / norm),
        }
    }

    /// Deterministic first and second moments of the one-step displacement
    /// `|Y_1| - |y|` from depth `y` with a uniform direction.
    pub fn one_step_oracle(&self, y: f64) -> Result<(f64, f64)> {
        let g = self.params.g();
        let v0 = (2.0 * g * -y).sqrt();
        let m1 = self.sphere_average(|u| {
            let fl = self.flight_vertical(y, u)?;
            self.expectation(&fl, 0.0, |t| -(v0 * u - g * t))
        })?;
        let m2 = self.sphere_average(|u| {
            let fl = self.flight_vertical(y, u)?;
            // D(t) = -(v0 u t - g t^2 / 2); d/dt D^2 = 2 D D'
            self.expectation(&fl, 0.0, |t| {
                let dd = -(v0 * u * t - 0.5 * g * t * t);
                2.0 * dd * -(v0 * u - g * t)
            })
        })?;
        Ok((m1, m2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn law(profile: DensityProfile, g: f64) -> ScatterLaw {
        ScatterLaw::raw(profile, FlightParams::new(g, 2).unwrap())
    }

    #[test]
    fn intensity_examples() {
        let l = law(DensityProfile::constant(1.0).unwrap(), 2.0);
        let f = l.flight_vertical(-2.0, -1.0).unwrap();
        assert!((l.intensity(&f, 0.0) - 8f64.sqrt()).abs() < 1e-14);
        let l = law(DensityProfile::power_law(1.0, 1.0).unwrap(), 2.0);
        let f = l.flight_vertical(-1.0, 1.0).unwrap();
        assert!(l.intensity(&f, 1.0).abs() < 1e-14);
        let l = law(DensityProfile::constant(2.0).unwrap(), 2.0);
        let f = l.flight_vertical(-1.0, 0.0).unwrap();
        assert!((l.intensity(&f, 0.0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn hazard_examples() {
        let l = law(DensityProfile::constant(1.0).unwrap(), 2.0);
        let f = l.flight_vertical(-2.0, -1.0).unwrap();
        assert!((l.cumulative_hazard(&f, 1.0) - (8f64.sqrt() + 1.0)).abs() < 1e-12);
        assert_eq!(l.cumulative_hazard(&f, 0.0), 0.0);
        assert!((l.survival(&f, 1.0) - (-(8f64.sqrt() + 1.0)).exp()).abs() < 1e-14);
        assert!((l.survival(&f, 1.0) - 0.02178).abs() < 5e-5);
        let l = law(DensityProfile::power_law(1.0, 0.0).unwrap(), 1.0);
        let f = l.flight_vertical(0.0, -1.0).unwrap();
        assert!((l.cumulative_hazard(&f, 2.0) - 2.0).abs() < 1e-12);
        assert!((l.survival(&f, 1.0) - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn power_law_hazard_from_rest() {
        // F(t) = c g^(l+1) t^(2l+2) / (2^(l+1) (l+1)) for a fall from depth 0
        for lambda in [1.0, 2.0, 0.5] {
            let l = law(DensityProfile::power_law(1.5, lambda).unwrap(), 0.7);
            let f = l.flight_vertical(0.0, -1.0).unwrap();
            let t: f64 = 1.3;
            let exact = 1.5 * 0.7f64.powf(lambda + 1.0) * t.powf(2.0 * lambda + 2.0)
                / (2f64.powf(lambda + 1.0) * (lambda + 1.0));
            let got = l.cumulative_hazard(&f, t);
            assert!((got - exact).abs() < 1e-10 * exact, "{lambda}: {got} vs {exact}");
        }
    }

    #[test]
    fn inversion_examples() {
        let l = law(DensityProfile::constant(1.0).unwrap(), 2.0);
        let f = l.flight_vertical(-2.0, -1.0).unwrap();
        assert_eq!(l.invert_hazard(&f, 0.0).unwrap(), 0.0);
        let n = l.invert_hazard(&f, 8f64.sqrt() + 1.0).unwrap();
        assert!((n - 1.0).abs() < 1e-10);
    }

    #[test]
    fn inversion_hits_target_hazard() {
        let laws = [
            law(DensityProfile::power_law(1.0, 1.0).unwrap(), 1.0),
            law(DensityProfile::power_law(0.3, 2.5).unwrap(), 2.0),
            law(DensityProfile::builtin("bump").unwrap(), 0.5),
            law(DensityProfile::constant(0.2).unwrap(), 3.0),
        ];
        for l in &laws {
            for (y, u) in [(-3.0, 0.9), (-0.01, 1.0), (-50.0, -0.3), (-1.0, 0.0)] {
                let f = l.flight_vertical(y, u).unwrap();
                for e in [1e-6, 0.3, 1.0, 7.0, 39.0] {
                    let t = l.invert_hazard(&f, e).unwrap();
                    let back = l.cumulative_hazard(&f, t);
                    assert!((back - e).abs() <= 1e-9 * e.max(1.0), "{:?} {y} {u} {e} -> {t} -> {back}", l.profile());
                }
            }
        }
    }

    #[test]
    fn sampler_ks_from_rest() {
        let l = law(DensityProfile::power_law(1.0, 0.0).unwrap(), 1.0);
        let f = l.flight_vertical(0.0, -1.0).unwrap();
        let mut r = substream(5, 0);
        let mut xs: Vec<f64> = (0..100_000).map(|_| l.sample_flight_time(&f, &mut r).unwrap()).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = 1.0 - (-x * x / 2.0).exp();
                ((i as f64 + 1.0) / n - cdf).abs().max((cdf - i as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 0.006, "{d}");
    }

    #[test]
    fn moment_oracle_constant_rate_limit() {
        // exponential limit: E N^p -> p! / rate^p
        let base = DensityProfile::constant(1.0).unwrap();
        let p = FlightParams::new(0.5, 2).unwrap();
        let l = ScatterLaw::new(base, p, ScalingRegime::RescaledDynamics { n: 1e8 }).unwrap();
        let m1 = l.moment_oracle(-1.0, 0.4, 1).unwrap() * 1e2;
        let m2 = l.moment_oracle(-1.0, 0.4, 2).unwrap() * 1e4;
        assert!((m1 - 1.0).abs() < 1e-3, "{m1}");
        assert!((m2 - 2.0).abs() < 2e-3, "{m2}");
    }

    #[test]
    fn moment_oracle_matches_closed_form_from_rest() {
        // from rest with h = 1, g = 1: N has density t exp(-t^2/2), E N = sqrt(pi/2)
        let l = law(DensityProfile::constant(1.0).unwrap(), 1.0);
        let m = l.moment_oracle(0.0, -1.0, 1).unwrap();
        assert!((m - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-11, "{m}");
        let m2 = l.moment_oracle(0.0, -1.0, 2).unwrap();
        assert!((m2 - 2.0).abs() < 1e-11, "{m2}");
    }

    #[test]
    fn fluctuation_vanishes_for_horizontal_start() {
        let l = law(DensityProfile::power_law(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(l.fluctuation_oracle(-3.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn thinning_agrees_with_inversion_on_window() {
        let l = law(DensityProfile::power_law(1.0, 1.0).unwrap(), 1.0);
        let f = l.flight_vertical(-2.0, 0.5).unwrap();
        let window = l.invert_hazard(&f, 1.0).unwrap();
        let mut r = substream(9, 1);
        let mut a = Vec::new();
        let mut b = Vec::new();
        while a.len() < 20_000 {
            if let Some(t) = l.sample_flight_time_thinning(&f, window, &mut r).unwrap() {
                a.push(t);
            }
        }
        while b.len() < 20_000 {
            let t = l.sample_flight_time(&f, &mut r).unwrap();
            if t <= window {
                b.push(t);
            }
        }
        let ks = crate::stats::ks_two_sample(&a, &b, 0.01).unwrap();
        assert!(ks.pass, "{ks:?}");
    }
}
