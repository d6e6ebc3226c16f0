use std::cmp::Ordering;

use super::TestReport;
use crate::{Error, Result};

/// Sample mean with its standard error `sd/√n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl MomentEstimate {
    /// Number of standard errors separating the mean from `value`.
    pub fn z_score(&self, value: f64) -> f64 {
        if self.std_error == 0.0 {
            if self.mean == value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - value).abs() / self.std_error
        }
    }
}

/// Mean and standard error of `transform` over `samples`.
pub fn empirical_moment<T, F>(samples: &[T], transform: F) -> Result<MomentEstimate>
where
    F: Fn(&T) -> f64,
{
    if samples.is_empty() {
        return Err(Error::Parameter("empirical moment of an empty sample".into()));
    }
    let n = samples.len();
    // Welford keeps constant samples at exactly zero variance.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let x = transform(s);
        if !x.is_finite() {
            return Err(Error::Parameter(format!("transform is not finite on sample {i}")));
        }
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    Ok(MomentEstimate { mean, std_error: (var / n as f64).sqrt(), n })
}

/// Kolmogorov–Smirnov statistic with its asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size used for the p-value.
    pub effective_n: f64,
}

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Parameter("KS test needs a nonempty sample".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parameter("KS test needs finite samples".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    Ok(v)
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Jacobi-theta form converges fast for small λ.
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (-m * m * c).exp()
            })
            .sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn asymptotic_p(d: f64, n_eff: f64) -> f64 {
    let sqrt_n = n_eff.sqrt();
    kolmogorov_survival((sqrt_n + 0.12 + 0.11 / sqrt_n) * d)
}

/// One-sample statistic `sup_x |F_n(x) - F(x)|`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    let sorted = sorted_finite(samples)?;
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult { statistic: d, p_value: asymptotic_p(d, n), effective_n: n })
}

/// Two-sample statistic `sup_x |F_a(x) - F_b(x)|`, ties handled jointly.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let a = sorted_finite(a)?;
    let b = sorted_finite(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
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
    Ok(KsResult { statistic: d, p_value: asymptotic_p(d, n_eff), effective_n: n_eff })
}

/// Reference distribution for [`ks_test`].
pub enum KsReference<'a> {
    Cdf(&'a dyn Fn(f64) -> f64),
    Samples(&'a [f64]),
}

/// KS test packaged as a [`TestReport`]; the caller supplies the threshold
/// on the statistic.
pub fn ks_test(
    name: &str,
    samples: &[f64],
    reference: KsReference<'_>,
    threshold: f64,
) -> Result<TestReport> {
    let (result, kind, n_ref) = match reference {
        KsReference::Cdf(cdf) => (ks_one_sample(samples, cdf)?, "one-sample", None),
        KsReference::Samples(other) => (ks_two_sample(samples, other)?, "two-sample", Some(other.len())),
    };
    let mut report = TestReport::new(name, result.statistic, threshold, samples.len())
        .with_meta("kind", kind)
        .with_meta("p_value", result.p_value);
    if let Some(m) = n_ref {
        report.insert_meta("n_reference", m);
    }
    Ok(report)
}

/// Empirical quantile with linear interpolation; `samples` need not be sorted.
pub fn quantile(samples: &[f64], q: f64) -> Result<f64> {
    let sorted = sorted_finite(samples)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Parameter(format!("quantile level {q} outside [0, 1]")));
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}
