//! Limit diffusions on (-inf, 0): generator coefficients, scale function and
//! speed measure, Bessel representations, exact Bessel sampling and an
//! Euler-Maruyama reference integrator.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::density::DensityProfile;
use crate::error::{invalid, Error, Result};
use crate::quadrature::Adaptive;

type Coef = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Coefficients {
    Skeleton { profile: DensityProfile, d: usize },
    Natural { profile: DensityProfile, d: usize, g: f64 },
    PublishedPowerLaw { c: f64, lambda: f64, d: usize, g: f64 },
    Custom { a: Coef, b: Coef },
}

/// Generator `a(y) f'' + b(y) f'` on (-inf, 0).
#[derive(Clone)]
pub struct GeneratorSpec {
    coef: Coefficients,
}

impl fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match &self.coef {
            Coefficients::Skeleton { .. } => "skeleton",
            Coefficients::Natural { .. } => "natural",
            Coefficients::PublishedPowerLaw { .. } => "published power law",
            Coefficients::Custom { .. } => "custom",
        };
        f.debug_struct("GeneratorSpec").field("kind", &name).finish()
    }
}

/// Limit of the collision chain at skeleton time:
/// `a = 1/(d h^2)`, `b = -a ((d-1)/(2|y|) + h'/h)`.
pub fn skeleton_generator(profile: &DensityProfile, d: usize) -> GeneratorSpec {
    GeneratorSpec { coef: Coefficients::Skeleton { profile: profile.clone(), d } }
}

/// Limit in physical time: the skeleton generator times the collision rate
/// `sqrt(2 g |y|) h(y)`.
pub fn natural_generator(profile: &DensityProfile, d: usize, g: f64) -> GeneratorSpec {
    GeneratorSpec { coef: Coefficients::Natural { profile: profile.clone(), d, g } }
}

/// The power-law generator with drift `(d-1)` in place of `(d-1-2 lambda)`,
/// kept for comparison with the natural generator (they agree at lambda = 0).
pub fn published_power_law_generator(c: f64, lambda: f64, d: usize, g: f64) -> GeneratorSpec {
    GeneratorSpec { coef: Coefficients::PublishedPowerLaw { c, lambda, d, g } }
}

impl GeneratorSpec {
    pub fn custom<A, B>(a: A, b: B) -> Self
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        GeneratorSpec { coef: Coefficients::Custom { a: Arc::new(a), b: Arc::new(b) } }
    }

    fn skeleton_ab(profile: &DensityProfile, d: usize, y: f64) -> (f64, f64) {
        let h = profile.value(y);
        let dh = profile.eval_derivative(y).unwrap_or(0.0);
        let a = 1.0 / (d as f64 * h * h);
        let b = -a * ((d as f64 - 1.0) / (2.0 * -y) + dh / h);
        (a, b)
    }

    pub fn coefficients(&self, y: f64) -> (f64, f64) {
        match &self.coef {
            Coefficients::Skeleton { profile, d } => Self::skeleton_ab(profile, *d, y),
            Coefficients::Natural { profile, d, g } => {
                let (a, b) = Self::skeleton_ab(profile, *d, y);
                let rate = (2.0 * g * -y).sqrt() * profile.value(y);
                (a * rate, b * rate)
            }
            Coefficients::PublishedPowerLaw { c, lambda, d, g } => {
                let x = -y;
                let k = (2.0 * g).sqrt() / (*d as f64 * c) * x.powf(0.5 - lambda);
                (k, -2.0 * k * (*d as f64 - 1.0) / (4.0 * x))
            }
            Coefficients::Custom { a, b } => (a(y), b(y)),
        }
    }

    pub fn a(&self, y: f64) -> f64 {
        self.coefficients(y).0
    }

    pub fn b(&self, y: f64) -> f64 {
        self.coefficients(y).1
    }
}

/// Scale function and speed measure normalized at y = -1:
/// `G(y) = ∫_{-1}^y h(u) |u|^{-(d-1)/2} du`, `m(dy) = d h(y) |y|^{(d-1)/2} dy`.
#[derive(Clone, Debug)]
pub struct ScaleSpeed {
    profile: DensityProfile,
    d: usize,
    quad: Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Boundary {
    Finite(f64),
    Infinite,
}

pub fn scale_speed(profile: &DensityProfile, d: usize) -> ScaleSpeed {
    ScaleSpeed { profile: profile.clone(), d, quad: Adaptive::new(1e-300, 1e-14) }
}

impl ScaleSpeed {
    fn half_power(&self) -> f64 {
        0.5 * (self.d as f64 - 1.0)
    }

    pub fn scale_derivative(&self, y: f64) -> f64 {
        self.profile.value(y) / (-y).powf(self.half_power())
    }

    pub fn speed_density(&self, y: f64) -> f64 {
        self.d as f64 * self.profile.value(y) * (-y).powf(self.half_power())
    }

    fn integrate_scale(&self, from: f64, to: f64) -> f64 {
        if from == to {
            return 0.0;
        }
        let (lo, hi, sign) = if from < to { (from, to, 1.0) } else { (to, from, -1.0) };
        sign * self.quad.integrate(|u| self.scale_derivative(u), &[lo, hi]).value
    }

    pub fn scale(&self, y: f64) -> f64 {
        self.integrate_scale(-1.0, y)
    }

    /// Residual of `a G'' + b G'` for the skeleton generator at `y`, with
    /// five-point differences of the quadrature G, plus the normalizer
    /// `|a G''| + |b G'| + 1`.
    pub fn harmonicity_residual(&self, y: f64) -> (f64, f64) {
        let h = 1e-3 * (-y).min(1.0);
        let dk = |k: f64| self.integrate_scale(y, y + k * h);
        let (p1, p2, m1, m2) = (dk(1.0), dk(2.0), dk(-1.0), dk(-2.0));
        let g2 = (-p2 + 16.0 * p1 + 16.0 * m1 - m2) / (12.0 * h * h);
        let g1 = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
        let (a, b) = skeleton_generator(&self.profile, self.d).coefficients(y);
        ((a * g2 + b * g1).abs(), (a * g2).abs() + (b * g1).abs() + 1.0)
    }

    /// `kappa(0) = ∫_{-1}^0 M(u) G'(u) du` with `M(u) = m((-1, u])`, summed over
    /// panels `[-2^-k, -2^-(k+1)]`.
    pub fn kappa_at_zero(&self) -> Boundary {
        let mut mass = 0.0;
        let mut total = 0.0;
        let mut prev: Option<f64> = None;
        let mut growing = 0;
        // nested quadrature: a looser tolerance keeps the cost bounded
        let q = Adaptive::new(0.0, 1e-11);
        for k in 0..1000 {
            let a = -(0.5f64.powi(k));
            let b = 0.5 * a;
            let m_at_a = mass;
            let inc = q
                .integrate(
                    |u| {
                        let m = m_at_a + q.integrate(|s| self.speed_density(s), &[a, u]).value;
                        m * self.scale_derivative(u)
                    },
                    &[a, b],
                )
                .value;
            mass += q.integrate(|s| self.speed_density(s), &[a, b]).value;
            total += inc;
            if let Some(p) = prev {
                if inc >= p {
                    growing += 1;
                } else {
                    growing = 0;
                }
                if growing >= 20 || !total.is_finite() {
                    return Boundary::Infinite;
                }
                if inc < p && inc < 1e-13 {
                    return Boundary::Finite(total);
                }
            }
            prev = Some(inc);
        }
        Boundary::Infinite
    }

    /// `G(-inf)` as the limit of `G(-2^k)`.
    pub fn scale_at_minus_infinity(&self) -> Boundary {
        let mut total = 0.0;
        let mut prev: Option<f64> = None;
        let mut growing = 0;
        for k in 0..1000 {
            let a = -(2f64.powi(k + 1));
            let b = -(2f64.powi(k));
            let inc = self.quad.integrate(|u| self.scale_derivative(u), &[a, b]).value;
            total -= inc;
            if let Some(p) = prev {
                if inc >= p {
                    growing += 1;
                } else {
                    growing = 0;
                }
                if growing >= 20 || !total.is_finite() {
                    return Boundary::Infinite;
                }
                if inc < p && inc < 1e-13 {
                    return Boundary::Finite(total);
                }
            }
            prev = Some(inc);
        }
        Boundary::Infinite
    }
}

/// `y = -coef * x^power` with x a Bessel process of dimension `delta` run at
/// speed `clock`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesselMap {
    pub delta: f64,
    pub coef: f64,
    pub power: f64,
    pub clock: f64,
    pub sampleable: bool,
}

impl BesselMap {
    pub fn to_depth(&self, x: f64) -> f64 {
        -self.coef * x.powf(self.power)
    }

    pub fn from_depth(&self, y: f64) -> f64 {
        (-y / self.coef).powf(1.0 / self.power)
    }

    /// Coefficients `(a, b)` of the generator of `-coef * x(clock t)^power`,
    /// obtained by the change of variables.
    pub fn induced_generator(&self, y: f64) -> (f64, f64) {
        let z = -y;
        let k = self.power;
        let s2 = self.coef.powf(2.0 / k);
        let a = 0.5 * self.clock * s2 * k * k * z.powf(2.0 - 2.0 / k);
        let b = 0.5 * self.clock * s2 * k * z.powf(1.0 - 2.0 / k) * (k + self.delta - 2.0);
        (a, -b)
    }
}

/// Bessel representation of `K |y|^alpha [f''/2 - gamma/(2|y|) f']` at the
/// given clock.
pub fn power_map(k_coef: f64, alpha: f64, gamma: f64, clock: f64) -> BesselMap {
    let k = 2.0 / (2.0 - alpha);
    let delta = 2.0 + k * (gamma - 1.0);
    let s = (k_coef / clock).sqrt() / k;
    BesselMap { delta, coef: s.powf(k), power: k, clock, sampleable: delta > 0.0 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitKind {
    /// Rescaled dynamics in physical time.
    Natural,
    /// Collision chain at skeleton time; the same map serves the rescaled
    /// skeleton and the unrescaled power-law chain.
    Skeleton,
    /// Dimension `(d+1+4l)/(2+2l)` with the Lamperti map and clock 2/d, as
    /// commonly quoted for the unrescaled power-law chain.
    RawPublished,
}

/// Bessel representation of the power-law limit with amplitude `c`.
pub fn bessel_map(lambda: f64, d: usize, kind: LimitKind, c: f64, g: f64) -> BesselMap {
    let df = d as f64;
    let gamma = 0.5 * (df - 1.0 - 2.0 * lambda);
    match kind {
        LimitKind::Natural => power_map(2.0 * (2.0 * g).sqrt() / (df * c), 0.5 - lambda, gamma, 1.0),
        LimitKind::Skeleton => power_map(2.0 / (df * c * c), -2.0 * lambda, gamma, 2.0 / df),
        LimitKind::RawPublished => {
            let mut m = power_map(2.0 / (df * c * c), -2.0 * lambda, gamma, 2.0 / df);
            m.delta = (df + 1.0 + 4.0 * lambda) / (2.0 * (1.0 + lambda));
            m.sampleable = m.delta > 0.0;
            m
        }
    }
}

/// Dimension of the time-changed Bessel process with identity map,
/// `(d + 1 - 2 lambda) / 2`; may be nonpositive.
pub fn time_changed_dimension(lambda: f64, d: usize) -> f64 {
    0.5 * (d as f64 + 1.0 - 2.0 * lambda)
}

/// Behaviour at 0 for dimensions below 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZeroBoundary {
    Reflecting,
    Absorbing,
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0).expect("positive gamma shape").sample(rng)
}

fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        0.0
    } else {
        Poisson::new(mean).expect("finite Poisson mean").sample(rng)
    }
}

/// One exact transition of the squared Bessel process of dimension `delta`
/// from `x2` over time `dt`.
pub fn besq_step<R: Rng + ?Sized>(delta: f64, x2: f64, dt: f64, zero: ZeroBoundary, rng: &mut R) -> f64 {
    let mu = x2 / (2.0 * dt);
    if zero == ZeroBoundary::Absorbing && delta < 2.0 {
        if x2 == 0.0 {
            return 0.0;
        }
        // killed transition: absorbed iff Gamma(1 - delta/2) >= mu, otherwise a
        // Poisson(mu - G) count drives a Gamma(k + 1) draw
        let gm = gamma_draw(1.0 - 0.5 * delta, rng);
        if gm >= mu {
            return 0.0;
        }
        let k = poisson_draw(mu - gm, rng);
        return 2.0 * dt * gamma_draw(k + 1.0, rng);
    }
    let k = poisson_draw(mu, rng);
    2.0 * dt * gamma_draw(0.5 * delta + k, rng)
}

/// Bessel process of dimension `delta` from `x0` at increasing `times`.
pub fn sample_bessel_path<R: Rng + ?Sized>(
    delta: f64,
    x0: f64,
    times: &[f64],
    zero: ZeroBoundary,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::NotSampleable { delta });
    }
    if !(x0 >= 0.0) {
        return Err(invalid("x0", "Bessel start must be nonnegative"));
    }
    let mut x2 = x0 * x0;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &s in times {
        if s < t {
            return Err(invalid("times", "must be nondecreasing and nonnegative"));
        }
        if s > t {
            x2 = besq_step(delta, x2, s - t, zero, rng);
            t = s;
        }
        out.push(x2.sqrt());
    }
    Ok(out)
}

/// Bessel process from `x0` stopped on hitting `level < x0`, read at
/// `horizon`. Exact transitions on `steps` equal steps plus a Brownian-bridge
/// crossing test between grid points. Returns the value and whether the level
/// was hit.
pub fn sample_bessel_stopped<R: Rng + ?Sized>(
    delta: f64,
    x0: f64,
    level: f64,
    horizon: f64,
    steps: usize,
    rng: &mut R,
) -> Result<(f64, bool)> {
    if !(delta > 0.0) {
        return Err(Error::NotSampleable { delta });
    }
    if !(level >= 0.0 && level < x0) {
        return Err(invalid("level", "must lie in [0, x0)"));
    }
    let dt = horizon / steps as f64;
    let mut x = x0;
    for _ in 0..steps {
        let next = besq_step(delta, x * x, dt, ZeroBoundary::Reflecting, rng).sqrt();
        if next <= level {
            return Ok((level, true));
        }
        let p = (-2.0 * (x - level) * (next - level) / dt).exp();
        if rng.random::<f64>() < p {
            return Ok((level, true));
        }
        x = next;
    }
    Ok((x, false))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmPath {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    /// Time of absorption at the upper cutoff, if it happened.
    pub absorbed: Option<f64>,
}

/// Euler-Maruyama for `dY = b dt + sqrt(2a) dW`, absorbed at `v`, recorded on
/// the grid `k dt`. Steps are halved while `|b| h >= 0.1 |Y|`.
pub fn euler_maruyama<R: Rng + ?Sized>(
    spec: &GeneratorSpec,
    y0: f64,
    dt: f64,
    horizon: f64,
    v: f64,
    rng: &mut R,
) -> Result<EmPath> {
    if !(y0 < v && v < 0.0) {
        return Err(invalid("y0", "need y0 < v < 0"));
    }
    if !(dt > 0.0 && horizon >= 0.0) {
        return Err(invalid("dt", "step and horizon must be positive"));
    }
    let steps = (horizon / dt).round() as usize;
    let mut t_out = Vec::with_capacity(steps + 1);
    let mut y_out = Vec::with_capacity(steps + 1);
    let mut y = y0;
    let mut absorbed = None;
    t_out.push(0.0);
    y_out.push(y);
    for k in 1..=steps {
        if absorbed.is_none() {
            let t0 = (k - 1) as f64 * dt;
            let mut done = 0.0;
            while done < dt {
                let (a, b) = spec.coefficients(y);
                let mut h = dt - done;
                let mut halvings = 0;
                while b.abs() * h >= 0.1 * y.abs() && halvings < 60 {
                    h *= 0.5;
                    halvings += 1;
                }
                let z: f64 = StandardNormal.sample(rng);
                y += b * h + (2.0 * a * h).sqrt() * z;
                done += h;
                if y >= v {
                    absorbed = Some(t0 + done);
                    y = v;
                    break;
                }
                if !(y.abs() >= 1e-9 && y.abs() <= 1e9) {
                    return Err(Error::BlowUp { t: t0 + done, y });
                }
            }
        }
        t_out.push(k as f64 * dt);
        y_out.push(y);
    }
    Ok(EmPath { t: t_out, y: y_out, absorbed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn skeleton_generator_examples() {
        let (a, b) = skeleton_generator(&DensityProfile::constant(1.0).unwrap(), 2).coefficients(-1.0);
        assert_eq!((a, b), (0.5, -0.25));
        let (a, b) = skeleton_generator(&DensityProfile::constant(2.0).unwrap(), 3).coefficients(-4.0);
        assert!((a - 1.0 / 12.0).abs() < 1e-15 && (b + 1.0 / 48.0).abs() < 1e-15);
    }

    #[test]
    fn natural_is_rate_times_skeleton() {
        let p = DensityProfile::power_law(1.3, 0.8).unwrap();
        for y in [-0.2, -1.0, -7.5] {
            let (a, b) = skeleton_generator(&p, 3).coefficients(y);
            let (na, nb) = natural_generator(&p, 3, 0.7).coefficients(y);
            let rate = (1.4 * -y as f64).sqrt() * p.eval(y).unwrap();
            assert!((na - a * rate).abs() <= 1e-12 * na.abs());
            assert!((nb - b * rate).abs() <= 1e-12 * nb.abs());
        }
        let (a, _) = natural_generator(&DensityProfile::constant(1.0).unwrap(), 2, 0.5).coefficients(-1.0);
        assert!((a - 0.5).abs() < 1e-15);
    }

    #[test]
    fn published_generator_agrees_at_lambda_zero() {
        let (a, b) = published_power_law_generator(1.0, 0.0, 2, 0.5).coefficients(-1.0);
        assert!((a - 0.5).abs() < 1e-15 && (b + 0.25).abs() < 1e-15);
        let (na, nb) = natural_generator(&DensityProfile::power_law(1.0, 0.0).unwrap(), 2, 0.5).coefficients(-1.0);
        assert!((a - na).abs() < 1e-15 && (b - nb).abs() < 1e-15);
    }

    #[test]
    fn bessel_map_examples() {
        let m = bessel_map(0.0, 2, LimitKind::Natural, 1.0, 1.0);
        assert!((m.delta - 4.0 / 3.0).abs() < 1e-15 && (m.power - 4.0 / 3.0).abs() < 1e-15);
        // scale (3 + 2l)(2g)^(1/4)/4 for c = 1
        for (lambda, g) in [(0.0, 1.0), (1.0, 0.5), (2.5, 3.0)] {
            let m = bessel_map(lambda, 2, LimitKind::Natural, 1.0, g);
            let s = (3.0 + 2.0 * lambda) * (2.0 * g as f64).powf(0.25) / 4.0;
            assert!((m.coef - s.powf(m.power)).abs() < 1e-12 * m.coef);
            assert!((m.delta - 4.0 / (3.0 + 2.0 * lambda)).abs() < 1e-14);
        }
        let m = bessel_map(0.0, 2, LimitKind::RawPublished, 1.0, 1.0);
        assert!((m.delta - 1.5).abs() < 1e-15 && (m.coef - 1.0).abs() < 1e-15 && (m.power - 1.0).abs() < 1e-15);
        let m = bessel_map(1.0, 2, LimitKind::RawPublished, 1.0, 1.0);
        assert!((m.delta - 1.75).abs() < 1e-15 && (m.clock - 1.0).abs() < 1e-15);
        // f(y) = |y|^2 / 2 = x  <=>  |y| = (2x)^(1/2)
        assert!((m.to_depth(2.0) + 2.0).abs() < 1e-14);
        let s = bessel_map(1.0, 2, LimitKind::Skeleton, 1.0, 1.0);
        assert!((s.delta - 1.25).abs() < 1e-15 && s.coef == m.coef);
        assert!(time_changed_dimension(3.0, 2) < 0.0);
    }

    #[test]
    fn induced_generator_reproduces_limits() {
        for (lambda, d, c, g) in [(0.0, 2, 1.0, 1.0), (1.0, 3, 0.7, 2.0), (2.5, 4, 1.9, 0.3)] {
            let p = DensityProfile::power_law(c, lambda).unwrap();
            let nat = bessel_map(lambda, d, LimitKind::Natural, c, g);
            let sk = bessel_map(lambda, d, LimitKind::Skeleton, c, g);
            for y in [-0.3, -1.0, -4.2] {
                let (a, b) = natural_generator(&p, d, g).coefficients(y);
                let (ia, ib) = nat.induced_generator(y);
                assert!(
                    (a - ia).abs() <= 1e-10 * a.abs() && (b - ib).abs() <= 1e-10 * a.abs() / -y,
                    "{lambda} {d} {y}: {a} {ia} {b} {ib}"
                );
                let (a, b) = skeleton_generator(&p, d).coefficients(y);
                let (ia, ib) = sk.induced_generator(y);
                assert!(
                    (a - ia).abs() <= 1e-10 * a.abs() && (b - ib).abs() <= 1e-10 * a.abs() / -y,
                    "sk {lambda} {d} {y}: {a} {ia} {b} {ib}"
                );
            }
        }
    }

    #[test]
    fn scale_function_and_kappa() {
        let s = scale_speed(&DensityProfile::constant(1.0).unwrap(), 2);
        assert!((s.scale(-4.0) + 2.0).abs() < 1e-8);
        for y in [-0.25, -0.5, -2.0, -9.0] {
            assert!((s.scale(y) - (2.0 - 2.0 * (-y as f64).sqrt())).abs() < 1e-12);
        }
        match s.kappa_at_zero() {
            Boundary::Finite(k) => assert!((k - 2.0).abs() < 1e-6, "{k}"),
            Boundary::Infinite => panic!("kappa should be finite"),
        }
        let inv = scale_speed(&DensityProfile::builtin("inverse-near-zero").unwrap(), 2);
        assert_eq!(inv.kappa_at_zero(), Boundary::Infinite);
    }

    #[test]
    fn scale_tail_classification() {
        let one = DensityProfile::constant(1.0).unwrap();
        match scale_speed(&one, 4).scale_at_minus_infinity() {
            Boundary::Finite(v) => assert!((v + 2.0).abs() < 1e-6, "{v}"),
            Boundary::Infinite => panic!("d = 4 scale should converge"),
        }
        assert_eq!(scale_speed(&one, 2).scale_at_minus_infinity(), Boundary::Infinite);
    }

    #[test]
    fn harmonicity() {
        for p in [
            DensityProfile::constant(1.0).unwrap(),
            DensityProfile::power_law(2.0, 1.5).unwrap(),
            DensityProfile::builtin("bump").unwrap(),
        ] {
            for d in [1, 2, 3, 5] {
                let s = scale_speed(&p, d);
                for y in [-0.1, -0.7, -1.0, -3.0, -20.0] {
                    let (r, norm) = s.harmonicity_residual(y);
                    assert!(r <= 1e-6 * norm, "d={d} y={y}: {r} vs {norm}");
                }
            }
        }
    }

    #[test]
    fn besq_mean_identity() {
        let mut r = substream(3, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_bessel_path(1.5, 1.0, &[0.7], ZeroBoundary::Reflecting, &mut r).unwrap()[0].powi(2))
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((mean - (1.0 + 1.5 * 0.7)).abs() < 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn absorbing_kills_at_the_right_rate() {
        // P(T0 > t) = P(Gamma(1 - delta/2) < x^2 / 2t)
        let mut r = substream(4, 0);
        let delta: f64 = 1.0;
        let n = 40_000;
        let alive = (0..n)
            .filter(|_| {
                let p = sample_bessel_path(delta, 1.0, &[0.5, 1.0], ZeroBoundary::Absorbing, &mut r).unwrap();
                p[1] > 0.0
            })
            .count() as f64
            / n as f64;
        // Gamma(1/2) < 1/2  <=>  |N| < 1
        let exact = statrs::function::erf::erf(1.0 / 2f64.sqrt());
        assert!((alive - exact).abs() < 4.0 * (exact * (1.0 - exact) / n as f64).sqrt(), "{alive} vs {exact}");
    }

    #[test]
    fn em_is_brownian_without_drift() {
        let spec = GeneratorSpec::custom(|_| 0.5, |_| 0.0);
        let mut r = substream(6, 0);
        let p = euler_maruyama(&spec, -50.0, 1e-2, 1.0, -1.0, &mut r).unwrap();
        assert_eq!(p.t.len(), 101);
        assert!(p.absorbed.is_none());
        assert!(euler_maruyama(&spec, -0.5, 1e-2, 1.0, -1.0, &mut r).is_err());
    }
}
