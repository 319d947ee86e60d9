//! Scatterer density profiles h(y) on y < 0.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user supplied C^2 profile. The derivative is mandatory; the witness must
/// return a positive lower bound for `inf_{y <= a} h(y)`.
#[derive(Clone)]
pub struct Tabulated {
    name: String,
    h: Scalar,
    dh: Scalar,
    witness: Scalar,
}

impl fmt::Debug for Tabulated {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tabulated").field("name", &self.name).finish()
    }
}

#[derive(Clone, Debug)]
pub enum DensityKind {
    Constant { c: f64 },
    PowerLaw { c: f64, lambda: f64 },
    Tabulated(Tabulated),
}

#[derive(Clone, Debug)]
pub struct DensityProfile {
    kind: DensityKind,
    // product of all rescale indices, and its square root
    n: f64,
    scale: f64,
}

impl DensityProfile {
    pub fn constant(c: f64) -> Result<Self> {
        check_amplitude(c)?;
        Ok(Self::from_kind(DensityKind::Constant { c }))
    }

    pub fn power_law(c: f64, lambda: f64) -> Result<Self> {
        check_amplitude(c)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be finite and >= 0, got {lambda}")));
        }
        Ok(Self::from_kind(DensityKind::PowerLaw { c, lambda }))
    }

    pub fn custom<H, D, W>(name: &str, h: H, dh: D, witness: W) -> Self
    where
        H: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        W: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_kind(DensityKind::Tabulated(Tabulated {
            name: name.to_string(),
            h: Arc::new(h),
            dh: Arc::new(dh),
            witness: Arc::new(witness),
        }))
    }

    /// Named profiles available from configuration files.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            // 1/|y| on (-1, 0), continued C^2 below -1 by adding (|y| - 1)^3
            "inverse-near-zero" => Ok(Self::custom(
                name,
                |y| {
                    let x = -y;
                    if x <= 1.0 {
                        1.0 / x
                    } else {
                        1.0 / x + (x - 1.0).powi(3)
                    }
                },
                |y| {
                    let x = -y;
                    if x <= 1.0 {
                        1.0 / (x * x)
                    } else {
                        1.0 / (x * x) - 3.0 * (x - 1.0).powi(2)
                    }
                },
                |_| 0.75,
            )),
            // 1 + 1/(1 + y^2): bounded, smooth, not a power law
            "bump" => {
                Ok(Self::custom(name, |y| 1.0 + 1.0 / (1.0 + y * y), |y| -2.0 * y / (1.0 + y * y).powi(2), |_| 1.0))
            }
            _ => Err(invalid("density", format!("unknown built-in profile `{name}`"))),
        }
    }

    fn from_kind(kind: DensityKind) -> Self {
        DensityProfile { kind, n: 1.0, scale: 1.0 }
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    /// Accumulated rescale index.
    pub fn rescale_index(&self) -> f64 {
        self.n
    }

    /// Amplitude `c` times the rescale factor, for Constant and PowerLaw.
    pub fn amplitude(&self) -> Option<f64> {
        match self.kind {
            DensityKind::Constant { c } | DensityKind::PowerLaw { c, .. } => Some(c * self.scale),
            DensityKind::Tabulated(_) => None,
        }
    }

    /// Exponent of a power law (0 for constants).
    pub fn exponent(&self) -> Option<f64> {
        match self.kind {
            DensityKind::Constant { .. } => Some(0.0),
            DensityKind::PowerLaw { lambda, .. } => Some(lambda),
            DensityKind::Tabulated(_) => None,
        }
    }

    /// True when h is constant, which allows closed-form hazards.
    pub fn is_flat(&self) -> bool {
        matches!(self.exponent(), Some(l) if l == 0.0)
    }

    /// h at depth `y`.
    pub fn eval(&self, y: f64) -> Result<f64> {
        if y > 0.0 || y.is_nan() {
            return Err(Error::Domain { what: "a density", y });
        }
        if y == 0.0 {
            if let DensityKind::Tabulated(_) = self.kind {
                return Err(Error::Domain { what: "a tabulated density (y = 0 undefined)", y });
            }
        }
        Ok(self.value(y))
    }

    /// h without domain checks; callers guarantee `y <= 0`.
    #[inline]
    pub(crate) fn value(&self, y: f64) -> f64 {
        let x = -y;
        let v = match &self.kind {
            DensityKind::Constant { c } => *c,
            DensityKind::PowerLaw { c, lambda } => c * pow_fast(x, *lambda),
            DensityKind::Tabulated(t) => (t.h)(y),
        };
        v * self.scale
    }

    pub fn eval_derivative(&self, y: f64) -> Result<f64> {
        if !(y < 0.0) {
            return Err(Error::Domain { what: "a density derivative", y });
        }
        let x = -y;
        let v = match &self.kind {
            DensityKind::Constant { .. } => 0.0,
            DensityKind::PowerLaw { c, lambda } => {
                if *lambda == 0.0 {
                    0.0
                } else {
                    -lambda * c * pow_fast(x, lambda - 1.0)
                }
            }
            DensityKind::Tabulated(t) => (t.dh)(y),
        };
        Ok(v * self.scale)
    }

    /// Lower bound for h on (-inf, a].
    pub fn lower_bound_witness(&self, a: f64) -> Result<f64> {
        if !(a < 0.0) {
            return Err(Error::Domain { what: "a positivity witness", y: a });
        }
        let v = match &self.kind {
            DensityKind::Constant { c } => *c,
            DensityKind::PowerLaw { c, lambda } => c * pow_fast(-a, *lambda),
            DensityKind::Tabulated(t) => (t.witness)(a),
        };
        Ok(v * self.scale)
    }

    /// The profile `sqrt(n) h`.
    pub fn rescale(&self, n: f64) -> Result<Self> {
        if !(n >= 1.0 && n.is_finite()) {
            return Err(invalid("n", format!("scaling index must be >= 1, got {n}")));
        }
        let total = self.n * n;
        Ok(DensityProfile { kind: self.kind.clone(), n: total, scale: total.sqrt() })
    }
}

fn check_amplitude(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(invalid("c", format!("density amplitude must be positive, got {c}")))
    }
}

#[inline]
pub(crate) fn pow_fast(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else if p == 0.5 {
        x.sqrt()
    } else if p == 3.0 {
        x * x * x
    } else {
        x.powf(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert_eq!(DensityProfile::power_law(1.0, 1.0).unwrap().eval(-2.0).unwrap(), 2.0);
        assert_eq!(DensityProfile::constant(3.0).unwrap().eval(-0.5).unwrap(), 3.0);
        assert_eq!(DensityProfile::power_law(2.0, 0.5).unwrap().eval(-4.0).unwrap(), 4.0);
        assert!(DensityProfile::constant(1.0).unwrap().eval(0.1).is_err());
        assert_eq!(DensityProfile::power_law(1.0, 2.0).unwrap().eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(DensityProfile::power_law(1.0, 1.0).unwrap().eval_derivative(-2.0).unwrap(), -1.0);
        assert_eq!(DensityProfile::constant(3.0).unwrap().eval_derivative(-1.0).unwrap(), 0.0);
        let p = DensityProfile::power_law(1.0, 2.0).unwrap();
        let fd = (p.eval(-3.0 + 1e-6).unwrap() - p.eval(-3.0 - 1e-6).unwrap()) / 2e-6;
        assert!((p.eval_derivative(-3.0).unwrap() - -6.0).abs() < 1e-12);
        assert!((fd - -6.0).abs() < 1e-6);
        assert!(p.eval_derivative(0.0).is_err());
    }

    #[test]
    fn rescale_examples() {
        let p = DensityProfile::constant(1.0).unwrap().rescale(4.0).unwrap();
        assert_eq!(p.eval(-7.0).unwrap(), 2.0);
        assert_eq!(DensityProfile::power_law(1.0, 1.0).unwrap().rescale(9.0).unwrap().eval(-2.0).unwrap(), 6.0);
        let q = DensityProfile::power_law(2.0, 0.5).unwrap().rescale(16.0).unwrap();
        assert_eq!(q.eval_derivative(-1.0).unwrap(), -4.0);
        assert!(p.rescale(0.5).is_err());
    }

    #[test]
    fn rescale_composes_exactly() {
        let p = DensityProfile::power_law(1.3, 0.7).unwrap();
        let a = p.rescale(3.0).unwrap().rescale(7.0).unwrap();
        let b = p.rescale(21.0).unwrap();
        for y in [-0.1, -1.0, -17.0] {
            assert_eq!(a.eval(y).unwrap(), b.eval(y).unwrap());
        }
    }

    #[test]
    fn builtins_have_consistent_derivatives() {
        for name in ["inverse-near-zero", "bump"] {
            let p = DensityProfile::builtin(name).unwrap();
            for y in [-0.3, -0.9, -1.2, -2.5, -10.0] {
                let e = 1e-6 * f64::max(1.0, -y);
                let fd = (p.eval(y + e).unwrap() - p.eval(y - e).unwrap()) / (2.0 * e);
                let d = p.eval_derivative(y).unwrap();
                assert!((d - fd).abs() <= 1e-6 * (1.0 + d.abs()), "{name} at {y}: {d} vs {fd}");
            }
            assert!(p.eval(0.0).is_err());
        }
        assert!(DensityProfile::builtin("nope").is_err());
    }
}
