//! Specular reflection of a parallel beam off the unit sphere: the outgoing
//! angle law and its comparison with the uniform law on the sphere.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};
use crate::quadrature::Adaptive;
use crate::stats::{ks_one_sample, KsResult};

/// Angle between the reflected direction and the beam axis for impact
/// parameter `b` (a point of the unit (d-1)-ball).
pub fn reflect(b: &[f64]) -> Result<f64> {
    let r = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(r < 1.0) {
        return Err(invalid("b", format!("impact parameter must be inside the unit ball, |b| = {r}")));
    }
    Ok(2.0 * r.asin())
}

/// The same angle by reflecting the incoming direction `-e_1` about the
/// outward normal at the hit point (Householder reflection).
pub fn reflect_vector(b: &[f64]) -> Result<f64> {
    let r2: f64 = b.iter().map(|x| x * x).sum();
    if !(r2 < 1.0) {
        return Err(invalid("b", "impact parameter must be inside the unit ball"));
    }
    let mut n = Vec::with_capacity(b.len() + 1);
    n.push((1.0 - r2).sqrt());
    n.extend_from_slice(b);
    let mut w = vec![0.0; n.len()];
    w[0] = -1.0;
    let dot: f64 = w.iter().zip(&n).map(|(a, b)| a * b).sum();
    let v: Vec<f64> = w.iter().zip(&n).map(|(a, b)| a - 2.0 * dot * b).collect();
    let perp = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(perp.atan2(v[0]))
}

/// `P(Theta <= beta) = sin(beta/2)^(d-1)`.
pub fn theta_cdf(beta: f64, d: usize) -> f64 {
    (0.5 * beta.clamp(0.0, std::f64::consts::PI)).sin().powi(d as i32 - 1)
}

/// Normalized surface measure of the polar cap of angle `beta` on `S^(d-1)`.
pub fn cap_measure(beta: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(invalid("d", "caps need d >= 2"));
    }
    let beta = beta.clamp(0.0, std::f64::consts::PI);
    Ok(match d {
        2 => beta / std::f64::consts::PI,
        3 => 0.5 * (1.0 - beta.cos()),
        _ => {
            let df = d as f64;
            let norm = (ln_gamma(0.5 * df) - ln_gamma(0.5 * (df - 1.0))).exp() / std::f64::consts::PI.sqrt();
            let q = Adaptive::new(1e-15, 1e-13);
            norm * q.integrate(|x: f64| x.sin().powi(d as i32 - 2), &[0.0, beta]).value
        }
    })
}

/// `f(pi/2) g(pi/4) / (g(pi/2) f(pi/4))` for the angle density f and the cap
/// density g, by central differences of the two CDFs.
pub fn density_ratio_witness(d: usize) -> Result<f64> {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
    let e = 1e-5;
    let f = |b: f64| (theta_cdf(b + e, d) - theta_cdf(b - e, d)) / (2.0 * e);
    let g = |b: f64| -> Result<f64> { Ok((cap_measure(b + e, d)? - cap_measure(b - e, d)?) / (2.0 * e)) };
    Ok(f(FRAC_PI_2) * g(FRAC_PI_4)? / (g(FRAC_PI_2)? * f(FRAC_PI_4)))
}

/// Uniform point of the unit ball in R^k: Gaussian direction, radius U^(1/k).
pub fn sample_ball<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            let r = rng.random::<f64>().powf(1.0 / k as f64);
            return v.into_iter().map(|x| x * r / n).collect();
        }
    }
}

#[derive(Clone, Debug)]
pub struct UniformityReport {
    pub d: usize,
    pub vs_theta_cdf: KsResult,
    pub vs_cap_measure: KsResult,
    pub radius: KsResult,
    pub thetas: Vec<f64>,
}

pub fn uniformity_experiment<R: Rng + ?Sized>(
    d: usize,
    samples: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<UniformityReport> {
    if d < 2 {
        return Err(invalid("d", "the reflection experiment needs d >= 2"));
    }
    if samples < 10_000 {
        return Err(invalid("samples", "need at least 10^4 draws"));
    }
    let mut thetas = Vec::with_capacity(samples);
    let mut radii = Vec::with_capacity(samples);
    for _ in 0..samples {
        let b = sample_ball(d - 1, rng);
        radii.push(b.iter().map(|x| x * x).sum::<f64>().sqrt());
        thetas.push(reflect(&b)?);
    }
    let vs_theta_cdf = ks_one_sample(&thetas, |x| theta_cdf(x, d), alpha)?;
    let vs_cap_measure = ks_one_sample(&thetas, |x| cap_measure(x, d).unwrap_or(f64::NAN), alpha)?;
    let radius = ks_one_sample(&radii, |r| r.clamp(0.0, 1.0).powi(d as i32 - 1), alpha)?;
    Ok(UniformityReport { d, vs_theta_cdf, vs_cap_measure, radius, thetas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

    #[test]
    fn reflect_examples() {
        assert_eq!(reflect(&[0.0, 0.0]).unwrap(), 0.0);
        assert!((reflect(&[FRAC_PI_8.sin()]).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!((reflect(&[0.5f64.sqrt(), 0.0]).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!(reflect(&[1.0]).is_err());
    }

    #[test]
    fn householder_agrees() {
        let mut r = substream(2, 0);
        for d in 2..6 {
            for _ in 0..1000 {
                let b = sample_ball(d - 1, &mut r);
                assert!((reflect(&b).unwrap() - reflect_vector(&b).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cdf_examples() {
        for d in 2..7 {
            assert!((theta_cdf(PI, d) - 1.0).abs() < 1e-15);
            assert!((cap_measure(PI, d).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!((theta_cdf(FRAC_PI_2, 3) - 0.5).abs() < 1e-15);
        assert!((theta_cdf(FRAC_PI_2, 2) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((cap_measure(FRAC_PI_2, 3).unwrap() - 0.5).abs() < 1e-15);
        assert!((cap_measure(FRAC_PI_2, 2).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn d3_identity_on_grid() {
        for i in 0..=100 {
            let b = PI * i as f64 / 100.0;
            assert!((theta_cdf(b, 3) - 0.5 * (1.0 - b.cos())).abs() <= 1e-14);
        }
    }

    #[test]
    fn generic_cap_matches_closed_forms() {
        // d = 4: (beta - sin(beta) cos(beta)) / pi
        for b in [0.3f64, 1.0, 2.2] {
            let exact = (b - b.sin() * b.cos()) / PI;
            assert!((cap_measure(b, 4).unwrap() - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn witness_values() {
        for d in 2..7 {
            let w = density_ratio_witness(d).unwrap();
            let exact = (2.0 * FRAC_PI_8.sin()).powi(3 - d as i32);
            assert!((w - exact).abs() < 1e-8, "d={d}: {w} vs {exact}");
        }
    }
}
