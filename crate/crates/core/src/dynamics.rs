//! Ballistic flight between collisions. Energy is normalized so that the speed
//! at depth `y` is `sqrt(2 g |y|)`; a flight is fixed by its start depth and
//! unit direction.

use smallvec::{smallvec, SmallVec};

use crate::error::{invalid, Error, Result};
use crate::quadrature::adaptive_simpson;

/// Unit vector in d-space; the last coordinate is the vertical one.
pub type Direction = SmallVec<[f64; 4]>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlightParams {
    g: f64,
    d: usize,
}

impl FlightParams {
    pub fn new(g: f64, d: usize) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(invalid("g", format!("must be positive and finite, got {g}")));
        }
        if d == 0 {
            return Err(invalid("d", "dimension must be at least 1"));
        }
        Ok(FlightParams { g, d })
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub(crate) fn with_g(self, g: f64) -> Self {
        FlightParams { g, d: self.d }
    }
}

/// Straight-down unit vector in dimension `d`.
pub fn downward(d: usize) -> Direction {
    let mut u: Direction = smallvec![0.0; d];
    u[d - 1] = -1.0;
    u
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParabolicFlight {
    y0: f64,
    u: Direction,
    params: FlightParams,
    // horizontal speed squared, initial vertical velocity
    a2: f64,
    b: f64,
}

impl ParabolicFlight {
    pub fn new(y0: f64, u: Direction, params: FlightParams) -> Result<Self> {
        if !(y0 <= 0.0) {
            return Err(Error::Domain { what: "a flight start", y: y0 });
        }
        if u.len() != params.d {
            return Err(invalid("u", format!("length {} but d = {}", u.len(), params.d)));
        }
        let norm2: f64 = u.iter().map(|x| x * x).sum();
        if (norm2.sqrt() - 1.0).abs() > 1e-12 {
            return Err(invalid("u", format!("not a unit vector (|u| = {})", norm2.sqrt())));
        }
        Ok(Self::from_parts(y0, u, params))
    }

    /// Flight with the given vertical component; the horizontal part points
    /// along the first axis. In d = 1 only `u_d = ±1` is admissible.
    pub fn vertical(y0: f64, u_d: f64, params: FlightParams) -> Result<Self> {
        if !(-1.0..=1.0).contains(&u_d) {
            return Err(invalid("u_d", format!("must lie in [-1, 1], got {u_d}")));
        }
        let d = params.d;
        let mut u: Direction = smallvec![0.0; d];
        u[d - 1] = u_d;
        if d > 1 {
            u[0] = ((1.0 - u_d) * (1.0 + u_d)).sqrt();
        }
        Self::new(y0, u, params)
    }

    pub(crate) fn from_parts(y0: f64, u: Direction, params: FlightParams) -> Self {
        let u_d = u[params.d - 1];
        let v0 = (2.0 * params.g * -y0).sqrt();
        let a2 = 2.0 * params.g * -y0 * ((1.0 - u_d) * (1.0 + u_d)).max(0.0);
        ParabolicFlight { y0, u, params, a2, b: v0 * u_d }
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn u(&self) -> &Direction {
        &self.u
    }

    pub fn u_d(&self) -> f64 {
        self.u[self.params.d - 1]
    }

    pub fn params(&self) -> FlightParams {
        self.params
    }

    /// Highest depth reached, `y0 (1 - u_d^2)`.
    pub fn apex_depth(&self) -> f64 {
        -self.a2 / (2.0 * self.params.g)
    }

    /// Time of the apex if it lies in the future.
    pub fn apex_time(&self) -> Option<f64> {
        (self.b > 0.0).then(|| self.b / self.params.g)
    }

    pub fn depth(&self, t: f64) -> f64 {
        let y = self.y0 + self.b * t - 0.5 * self.params.g * t * t;
        y.min(self.apex_depth())
    }

    /// Vertical velocity.
    pub fn vertical_velocity(&self, t: f64) -> f64 {
        self.b - self.params.g * t
    }

    pub fn speed(&self, t: f64) -> f64 {
        let w = self.b - self.params.g * t;
        (self.a2 + w * w).sqrt()
    }

    /// Direction of motion at time `t`. At a point of zero speed (top of a
    /// vertical launch from depth 0) the particle falls straight down.
    pub fn direction_at(&self, t: f64) -> Direction {
        let d = self.params.d;
        let s = self.speed(t);
        if s == 0.0 {
            return downward(d);
        }
        let v0 = (2.0 * self.params.g * -self.y0).sqrt();
        let mut u: Direction = self.u.iter().map(|x| x * v0 / s).collect();
        u[d - 1] = self.vertical_velocity(t) / s;
        u
    }

    /// Arc length travelled in [0, t].
    pub fn arc_length(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let g = self.params.g;
        let a2 = self.a2;
        let w1 = self.b;
        let w2 = self.b - g * t;
        if a2 < 1e-16 * w1 * w1 || a2 == 0.0 {
            // nearly vertical; the integrand is |w| up to a negligible rounding
            let tol = 1e-15 * (w1.abs() + w2.abs()) * t + f64::MIN_POSITIVE;
            return match self.apex_time() {
                Some(ta) if ta < t => {
                    adaptive_simpson(|s| self.speed(s), 0.0, ta, tol) + adaptive_simpson(|s| self.speed(s), ta, t, tol)
                }
                _ => adaptive_simpson(|s| self.speed(s), 0.0, t, tol),
            };
        }
        let s1 = (a2 + w1 * w1).sqrt();
        let s2 = (a2 + w2 * w2).sqrt();
        let gt = g * t;
        if w1 * w2 > 0.0 {
            // same side of the apex: difference formulas avoid cancellation
            let dws = gt * (w1 + w2) * (a2 + w1 * w1 + w2 * w2) / (w1 * s1 + w2 * s2);
            let das = (gt * (w1 + w2) / (w1 * s2 + w2 * s1)).asinh();
            (dws + a2 * das) / (2.0 * g)
        } else {
            let a = a2.sqrt();
            let p = |w: f64, s: f64| 0.5 * (w * s + a2 * (w / a).asinh());
            (p(w1, s1) - p(w2, s2)) / g
        }
    }
}

/// Time needed to travel unit arc length from depth `y <= -1` with vertical
/// direction component `u_d`.
pub fn unit_step_time(y: f64, u_d: f64, params: FlightParams) -> Result<f64> {
    if !(y <= -1.0) {
        return Err(Error::Domain { what: "the unit-step model (needs y <= -1)", y });
    }
    let flight = ParabolicFlight::vertical(y, u_d, params)?;
    let k = (2.0 / params.g).sqrt();
    let x = -y;
    let mut lo = k / ((x + 1.0).sqrt() + x.sqrt());
    let mut hi = k / (x.sqrt() + (x - 1.0).sqrt());
    let mut t = lo + 0.5 * (1.0 + u_d) * (hi - lo);
    for _ in 0..200 {
        let r = flight.arc_length(t) - 1.0;
        if r == 0.0 {
            return Ok(t);
        }
        if r < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - r / flight.speed(t);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 4.0 * f64::EPSILON * t || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        t = next;
    }
    Err(Error::NoConvergence(format!("unit_step_time at y = {y}, u_d = {u_d}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fl(y0: f64, u_d: f64, g: f64) -> ParabolicFlight {
        ParabolicFlight::vertical(y0, u_d, FlightParams::new(g, 2).unwrap()).unwrap()
    }

    #[test]
    fn depth_examples() {
        assert_eq!(fl(-1.0, 0.0, 2.0).depth(0.0), -1.0);
        assert!(fl(-1.0, 1.0, 2.0).depth(1.0).abs() < 1e-15);
        let y = fl(-2.0, -1.0, 2.0).depth(1.0);
        assert!((y - (-3.0 - 8f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn speed_examples() {
        assert!(fl(-1.0, 1.0, 2.0).speed(1.0).abs() < 1e-15);
        assert!((fl(-2.0, 0.0, 2.0).speed(0.0) - 8f64.sqrt()).abs() < 1e-14);
        assert!((fl(-2.0, -1.0, 2.0).speed(1.0) - (8f64.sqrt() + 2.0)).abs() < 1e-14);
    }

    #[test]
    fn arc_length_vertical_closed_form() {
        let l = fl(-2.0, -1.0, 2.0).arc_length(1.0);
        assert!((l - (8f64.sqrt() + 1.0)).abs() < 1e-12, "{l}");
        assert_eq!(fl(-2.0, 0.3, 2.0).arc_length(0.0), 0.0);
    }

    #[test]
    fn arc_length_matches_riemann_sum() {
        let f = fl(-4.0, 0.0, 2.0);
        let n = 1_000_000;
        let h = 0.5 / n as f64;
        let riemann: f64 = (0..n).map(|i| f.speed((i as f64 + 0.5) * h) * h).sum();
        assert!((f.arc_length(0.5) - riemann).abs() < 1e-8);
    }

    #[test]
    fn arc_length_across_apex() {
        let f = fl(-3.0, 0.8, 1.5);
        let ta = f.apex_time().unwrap();
        let n = 400_000;
        let t = 2.5 * ta;
        let h = t / n as f64;
        let riemann: f64 = (0..n).map(|i| f.speed((i as f64 + 0.5) * h) * h).sum();
        assert!((f.arc_length(t) - riemann).abs() < 1e-8);
    }

    #[test]
    fn unit_step_closed_forms() {
        let p = FlightParams::new(2.0, 2).unwrap();
        let up = unit_step_time(-4.0, 1.0, p).unwrap();
        assert!((up - (2.0 - 3f64.sqrt())).abs() < 1e-12, "{up}");
        let down = unit_step_time(-4.0, -1.0, p).unwrap();
        assert!((down - (5f64.sqrt() - 2.0)).abs() < 1e-12, "{down}");
    }

    #[test]
    fn unit_step_horizontal_matches_bisection() {
        let p = FlightParams::new(2.0, 2).unwrap();
        let f = fl(-4.0, 0.0, 2.0);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if f.arc_length(m) < 1.0 {
                lo = m
            } else {
                hi = m
            }
        }
        let t = unit_step_time(-4.0, 0.0, p).unwrap();
        assert!((t - lo).abs() < 1e-10);
        assert!(unit_step_time(-0.5, 0.0, p).is_err());
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(FlightParams::new(0.0, 2).is_err());
        assert!(FlightParams::new(1.0, 0).is_err());
        let p = FlightParams::new(1.0, 2).unwrap();
        assert!(ParabolicFlight::new(-1.0, smallvec![0.6, 0.7], p).is_err());
        assert!(ParabolicFlight::new(0.5, smallvec![0.6, 0.8], p).is_err());
    }

    #[test]
    fn direction_at_is_unit_and_continues_the_flight() {
        let f = fl(-3.0, 0.4, 1.0);
        let t1 = 0.7;
        let u = f.direction_at(t1);
        let n: f64 = u.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
        let g = ParabolicFlight::new(f.depth(t1), u, f.params()).unwrap();
        for s in [0.1, 0.5, 1.3] {
            assert!((g.depth(s) - f.depth(t1 + s)).abs() < 1e-12);
        }
    }
}
