//! Streaming moments, Kolmogorov-Smirnov tests and convergence ladders.

use serde::Serialize;

mod scans;
pub use scans::*;

use crate::error::{invalid, Result};

/// Running mean and central moments up to order four. Merging two
/// accumulators gives the same result as pushing all samples into one.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MomentAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let t1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += t1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += t1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += t1;
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let na = self.n as f64;
        let nb = other.n as f64;
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;
        let mean = self.mean + delta * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 =
            self.m3 + other.m3 + d3 * na * nb * (na - nb) / (n * n) + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        *self = MomentAccumulator { n: self.n + other.n, mean, m2, m3, m4 };
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            self.m2 / (self.n as f64 - 1.0)
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    pub fn skewness(&self) -> f64 {
        let n = self.n as f64;
        n.sqrt() * self.m3 / self.m2.powf(1.5)
    }

    pub fn excess_kurtosis(&self) -> f64 {
        let n = self.n as f64;
        n * self.m4 / (self.m2 * self.m2) - 3.0
    }
}

impl FromIterator<f64> for MomentAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical: f64,
    pub n_eff: f64,
    pub pass: bool,
}

pub const KS_MIN_SAMPLES: usize = 100;

/// Asymptotic two-sided critical value `sqrt(-ln(alpha/2)/2) / sqrt(n_eff)`.
pub fn ks_critical(alpha: f64, n_eff: f64) -> f64 {
    (-(0.5 * alpha).ln() / 2.0).sqrt() / n_eff.sqrt()
}

fn check_ks(n: usize, alpha: f64) -> Result<()> {
    if n < KS_MIN_SAMPLES {
        return Err(invalid("samples", format!("KS needs at least {KS_MIN_SAMPLES} samples, got {n}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(invalid("samples", "NaN in sample"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F, alpha: f64) -> Result<KsResult> {
    check_ks(xs.len(), alpha)?;
    let v = sorted(xs)?;
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        if f.is_nan() {
            return Err(invalid("cdf", format!("NaN at {x}")));
        }
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let critical = ks_critical(alpha, n);
    Ok(KsResult { statistic: d, critical, n_eff: n, pass: d <= critical })
}

pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsResult> {
    check_ks(a.len().min(b.len()), alpha)?;
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    let critical = ks_critical(alpha, n_eff);
    Ok(KsResult { statistic: d, critical, n_eff, pass: d <= critical })
}

/// One rung of a convergence ladder: an estimate at a given scale.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderRung {
    pub rung: f64,
    pub statistic: f64,
    pub target: f64,
    pub se: f64,
}

impl LadderRung {
    pub fn error(&self) -> f64 {
        (self.statistic - self.target).abs()
    }

    pub fn within(&self, k_se: f64) -> bool {
        self.error() <= k_se * self.se
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderReport {
    pub label: String,
    pub rungs: Vec<LadderRung>,
    pub k_se: f64,
    /// every rung within `k_se` standard errors
    pub all_within: bool,
    /// the top rung within `k_se` standard errors
    pub top_within: bool,
    /// errors decrease along the ladder, up to noise at the `k_se` level
    pub monotone: bool,
}

impl LadderReport {
    pub fn new(label: &str, rungs: Vec<LadderRung>, k_se: f64) -> Self {
        let all_within = !rungs.is_empty() && rungs.iter().all(|r| r.within(k_se));
        let top_within = rungs.last().is_some_and(|r| r.within(k_se));
        let monotone = rungs.windows(2).all(|w| w[1].error() <= w[0].error() + k_se * w[1].se.max(w[0].se));
        LadderReport { label: label.to_string(), rungs, k_se, all_within, top_within, monotone }
    }
}

/// Least squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn median(xs: &[f64]) -> f64 {
    let v = match sorted(xs) {
        Ok(v) if !v.is_empty() => v,
        _ => return f64::NAN,
    };
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Binomial proportion and its standard error.
pub fn proportion(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = successes as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;
    use rand_distr::{Distribution, Exp1};

    #[test]
    fn accumulator_matches_two_pass() {
        let mut r = substream(3, 0);
        let xs: Vec<f64> = (0..5000).map(|_| Exp1.sample(&mut r)).collect();
        let acc: MomentAccumulator = xs.iter().copied().collect();
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let c = |p: i32| xs.iter().map(|x| (x - m).powi(p)).sum::<f64>() / n;
        assert!((acc.mean() - m).abs() < 1e-12);
        assert!((acc.variance() - c(2) * n / (n - 1.0)).abs() < 1e-10);
        assert!((acc.skewness() - c(3) / c(2).powf(1.5)).abs() < 1e-9);
        assert!((acc.excess_kurtosis() - (c(4) / (c(2) * c(2)) - 3.0)).abs() < 1e-8);
    }

    #[test]
    fn merge_equals_concatenation() {
        let mut r = substream(4, 0);
        let xs: Vec<f64> = (0..1001).map(|_| r.random::<f64>() * 3.0 - 1.0).collect();
        let whole: MomentAccumulator = xs.iter().copied().collect();
        let mut a: MomentAccumulator = xs[..317].iter().copied().collect();
        let b: MomentAccumulator = xs[317..].iter().copied().collect();
        a.merge(&b);
        assert_eq!(a.count(), whole.count());
        assert!((a.mean() - whole.mean()).abs() < 1e-13);
        assert!((a.variance() - whole.variance()).abs() < 1e-12);
        assert!((a.skewness() - whole.skewness()).abs() < 1e-10);
        assert!((a.excess_kurtosis() - whole.excess_kurtosis()).abs() < 1e-10);
    }

    #[test]
    fn ks_uniform() {
        let mut r = substream(5, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| r.random::<f64>()).collect();
        let res = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0), 0.01).unwrap();
        assert!(res.pass, "{res:?}");
        let shifted = ks_one_sample(&xs, |x| (x * 1.1).clamp(0.0, 1.0), 0.01).unwrap();
        assert!(!shifted.pass);
        assert!(ks_one_sample(&xs[..50], |x| x, 0.01).is_err());
    }

    #[test]
    fn ks_two_sample_statistic_by_hand() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..100).map(|i| i as f64 + 10.5).collect();
        let res = ks_two_sample(&a, &b, 0.05).unwrap();
        assert!((res.statistic - 0.11).abs() < 1e-12);
        assert!((res.n_eff - 50.0).abs() < 1e-12);
        // ties are handled jointly
        let c = ks_two_sample(&a, &a, 0.05).unwrap();
        assert_eq!(c.statistic, 0.0);
    }

    #[test]
    fn critical_value() {
        // standard tabulated value for alpha = 0.05 is about 1.358
        assert!((ks_critical(0.05, 1.0) - 1.3581).abs() < 1e-3);
    }

    #[test]
    fn ladder_flags() {
        let rungs = vec![
            LadderRung { rung: 1.0, statistic: 1.3, target: 1.0, se: 0.05 },
            LadderRung { rung: 2.0, statistic: 1.05, target: 1.0, se: 0.05 },
        ];
        let rep = LadderReport::new("x", rungs, 3.0);
        assert!(rep.top_within && rep.monotone && !rep.all_within);
    }

    #[test]
    fn slope_and_median() {
        assert!((ols_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
