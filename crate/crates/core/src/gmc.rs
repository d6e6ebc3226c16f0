//! The log-correlated field on a circle of radius `r` and the regularised
//! chaos measure `e^{γG(re^{iθ})} (1-r²)^{γ²} dθ/2π`, built directly from
//! Gaussians without going through orthogonal polynomials.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::analysis::ln_gamma;
use crate::measures::uniform_grid;
use crate::sampling::{sample_complex_gaussians_with, ComplexGaussianVector};
use crate::{Error, Result};

/// Field values `G_K(re^{iθ})` on a uniform grid of the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub r: f64,
    pub theta_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub k_max: usize,
}

impl FieldSample {
    /// Columns `theta,field`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["theta", "field"])?;
        for (t, g) in self.theta_grid.iter().zip(&self.values) {
            w.write_record([t.to_string(), g.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reusable length-`M` synthesis of `2 Re Σ_{k≤K} r^k e^{ikθ} N_k/√k`.
///
/// Frequencies `k ≥ M` are folded onto `k mod M`, which is exact on the
/// grid.
#[derive(Clone)]
pub struct FieldSynthesizer {
    grid: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl FieldSynthesizer {
    pub fn new(grid_size: usize) -> Result<Self> {
        if grid_size == 0 {
            return Err(Error::Parameter("grid size must be positive".into()));
        }
        let fft = FftPlanner::new().plan_fft_inverse(grid_size);
        Ok(Self { grid: uniform_grid(grid_size), fft })
    }

    pub fn grid_size(&self) -> usize {
        self.grid.len()
    }

    pub fn synthesize(&self, gaussians: &ComplexGaussianVector, r: f64) -> Result<FieldSample> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Domain(format!("radius must lie in (0, 1), got {r}")));
        }
        let m = self.grid.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let mut rk = 1.0;
        for (i, n) in gaussians.values().iter().enumerate() {
            let k = i + 1;
            rk *= r;
            buf[k % m] += n * (rk / (k as f64).sqrt());
        }
        self.fft.process(&mut buf);
        Ok(FieldSample {
            r,
            theta_grid: self.grid.clone(),
            values: buf.iter().map(|z| 2.0 * z.re).collect(),
            k_max: gaussians.len(),
        })
    }
}

/// One-off version of [`FieldSynthesizer::synthesize`] on `grid_size`
/// uniform angles.
pub fn field_on_circle(gaussians: &ComplexGaussianVector, r: f64, grid_size: usize) -> Result<FieldSample> {
    FieldSynthesizer::new(grid_size)?.synthesize(gaussians, r)
}

/// Variance `2 Σ_{k>K} r^{2k}/k` dropped by truncating the series at `K`.
pub fn truncation_tail_variance(r: f64, k_max: usize) -> f64 {
    let r2 = r * r;
    let full = -2.0 * (-r2).ln_1p();
    let mut head = 0.0;
    let mut p = 1.0;
    for k in 1..=k_max {
        p *= r2;
        head += p / k as f64;
        if p < 1e-300 {
            break;
        }
    }
    (full - 2.0 * head).max(0.0)
}

/// Smallest truncation with `K ≥ 4/(1-r)`.
pub fn default_truncation(r: f64) -> usize {
    (4.0 / (1.0 - r)).ceil() as usize
}

/// `E[density]` for the truncated field: `exp(-γ² tail/2)`.
pub fn expected_density_mean(gamma: f64, r: f64, k_max: usize) -> f64 {
    (-0.5 * gamma * gamma * truncation_tail_variance(r, k_max)).exp()
}

/// Density of the regularised measure w.r.t. `dθ/2π` and its grid mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmcMeasureSample {
    pub gamma: f64,
    pub r: f64,
    pub density: Vec<f64>,
    pub total_mass: f64,
}

impl GmcMeasureSample {
    /// Columns `theta,density`.
    pub fn write_csv<W: Write>(&self, theta: &[f64], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["theta", "density"])?;
        for (t, d) in theta.iter().zip(&self.density) {
            w.write_record([t.to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `e^{γG} (1-r²)^{γ²}` on the field's grid; mass by the rectangle rule.
pub fn gmc_r_measure(field: &FieldSample, gamma: f64) -> Result<GmcMeasureSample> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!("gamma must be nonnegative, got {gamma}")));
    }
    let log_norm = gamma * gamma * (-field.r * field.r).ln_1p();
    let density: Vec<f64> = field.values.iter().map(|g| (gamma * g + log_norm).exp()).collect();
    let total_mass = density.iter().sum::<f64>() / density.len() as f64;
    Ok(GmcMeasureSample { gamma, r: field.r, density, total_mass })
}

/// Total mass of one regularised chaos sample, drawing `k_max` Gaussians
/// from `rng`.
pub fn gmc_total_mass_with<R: Rng>(
    synth: &FieldSynthesizer,
    gamma: f64,
    r: f64,
    k_max: usize,
    rng: &mut R,
) -> Result<f64> {
    let g = sample_complex_gaussians_with(k_max, rng);
    Ok(gmc_r_measure(&synth.synthesize(&g, r)?, gamma)?.total_mass)
}

/// The constant `K_γ`: `1/Γ(1-γ²)` below criticality and `2` at `γ = 1`.
pub fn fb_constant(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
    }
    if gamma > 1.0 {
        return Err(Error::Phase(format!("no total-mass law for gamma = {gamma} > 1")));
    }
    if gamma == 1.0 {
        return Ok(2.0);
    }
    Ok((-ln_gamma(1.0 - gamma * gamma)).exp())
}

/// `P(mass ≤ x) = exp(-(x/K_γ)^{-1/γ²})`.
pub fn fb_cdf(gamma: f64, x: f64) -> Result<f64> {
    let k = fb_constant(gamma)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok((-(x / k).powf(-1.0 / (gamma * gamma))).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{empirical_moment, ks_two_sample};
    use crate::montecarlo::{derive_seed, replica_rng, ReplicaPool, StreamTag};
    use crate::sampling::sample_complex_gaussians;

    #[test]
    fn zero_gaussians_give_zero_field() {
        let f = field_on_circle(&ComplexGaussianVector::zeros(50), 0.9, 64).unwrap();
        assert!(f.values.iter().all(|v| *v == 0.0));
        let m = gmc_r_measure(&f, 0.0).unwrap();
        assert!(m.density.iter().all(|d| *d == 1.0));
        assert_eq!(m.total_mass, 1.0);
        assert!(matches!(field_on_circle(&ComplexGaussianVector::zeros(1), 1.0, 8), Err(Error::Domain(_))));
    }

    #[test]
    fn fft_matches_direct_sum_including_folding() {
        let g = sample_complex_gaussians(40, 5);
        let r = 0.8;
        let m = 16;
        let f = field_on_circle(&g, r, m).unwrap();
        for (l, &t) in f.theta_grid.iter().enumerate() {
            let direct: f64 = g
                .values()
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    let k = (i + 1) as f64;
                    2.0 * (Complex64::from_polar(r.powf(k), k * t) * n / k.sqrt()).re
                })
                .sum();
            assert!((f.values[l] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn pointwise_variance_and_covariance() {
        let r: f64 = 0.9;
        let synth = FieldSynthesizer::new(64).unwrap();
        let pool = ReplicaPool::default();
        let pairs = pool.map(10_000, |i| {
            let g = sample_complex_gaussians(2000, derive_seed(4, i, StreamTag::Gaussians));
            let f = synth.synthesize(&g, r).unwrap();
            (f.values[0], f.values[32])
        });
        let var = empirical_moment(&pairs, |p| p.0 * p.0).unwrap();
        assert!(var.z_score(-2.0 * (1.0 - r * r).ln()) < 3.0, "{var:?}");
        let cov = empirical_moment(&pairs, |p| p.0 * p.1).unwrap();
        assert!(cov.z_score(-2.0 * (1.0 + r * r).ln()) < 3.0, "{cov:?}");
        let mean = empirical_moment(&pairs, |p| p.0).unwrap();
        assert!(mean.z_score(0.0) < 3.0);
    }

    #[test]
    fn tail_variance_and_default_truncation() {
        assert!((truncation_tail_variance(0.5, 0) - (-2.0 * 0.75f64.ln())).abs() < 1e-15);
        let direct: f64 = (6..2000).map(|k| 2.0 * 0.25f64.powi(k) / k as f64).sum();
        assert!((truncation_tail_variance(0.5, 5) - direct).abs() < 1e-15);
        for r in [0.5, 0.9, 0.99, 0.999] {
            assert!(truncation_tail_variance(r, default_truncation(r)) < 1e-3);
        }
    }

    #[test]
    fn density_mean_is_one_up_to_truncation() {
        let (gamma, r, k) = (0.7, 0.95, 15);
        let synth = FieldSynthesizer::new(32).unwrap();
        let pool = ReplicaPool::default();
        let d = pool.map(20_000, |i| {
            let mut rng = replica_rng(8, i, StreamTag::Gaussians);
            let g = sample_complex_gaussians_with(k, &mut rng);
            gmc_r_measure(&synth.synthesize(&g, r).unwrap(), gamma).unwrap().density[5]
        });
        let est = empirical_moment(&d, |x| *x).unwrap();
        let target = expected_density_mean(gamma, r, k);
        assert!(target < 0.97);
        assert!(est.z_score(target) < 3.0, "{est:?} vs {target}");
    }

    #[test]
    fn rotation_invariance_of_marginals() {
        let synth = FieldSynthesizer::new(128).unwrap();
        let pool = ReplicaPool::default();
        let pairs = pool.map(10_000, |i| {
            let mut rng = replica_rng(9, i, StreamTag::Gaussians);
            let m = gmc_r_measure(
                &synth.synthesize(&sample_complex_gaussians_with(200, &mut rng), 0.95).unwrap(),
                0.7,
            )
            .unwrap();
            (m.density[0], m.density[64])
        });
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        assert!(ks_two_sample(&a, &b).unwrap().statistic < 0.02);
    }

    #[test]
    fn mass_quantiles_spread_towards_criticality() {
        // Mean stays 1 while the law spreads as γ increases to 1.
        let (r, k) = (0.98, default_truncation(0.98));
        let synth = FieldSynthesizer::new(1024).unwrap();
        let pool = ReplicaPool::default();
        let mut prev_spread = 0.0;
        for gamma in [0.9, 0.95, 0.99] {
            let masses = pool.map(4000, |i| {
                gmc_total_mass_with(&synth, gamma, r, k, &mut replica_rng(11, i, StreamTag::Field)).unwrap()
            });
            let est = empirical_moment(&masses, |x| *x).unwrap();
            assert!(est.z_score(expected_density_mean(gamma, r, k)) < 4.0, "gamma={gamma} {est:?}");
            let q = |p| crate::analysis::quantile(&masses, p).unwrap();
            let spread = q(0.9) / q(0.1);
            assert!(spread > prev_spread, "gamma={gamma}");
            prev_spread = spread;
        }
    }

    #[test]
    fn fb_examples() {
        for gamma in [0.3, 0.5, 1.0 / 2f64.sqrt(), 1.0] {
            let k = fb_constant(gamma).unwrap();
            assert!((fb_cdf(gamma, k).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
            assert_eq!(fb_cdf(gamma, 0.0).unwrap(), 0.0);
            assert!(fb_cdf(gamma, 1e-3).unwrap() < 1e-6);
            assert!(fb_cdf(gamma, 1e6).unwrap() > 1.0 - 1e-3);
        }
        assert_eq!(fb_constant(1.0).unwrap(), 2.0);
        assert!((fb_constant(0.5).unwrap() - 1.0 / statrs::function::gamma::gamma(0.75)).abs() < 1e-14);
        assert!(matches!(fb_cdf(1.2, 1.0), Err(Error::Phase(_))));
    }

    #[test]
    fn csv_export() {
        let f = field_on_circle(&sample_complex_gaussians(10, 1), 0.5, 4).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
        let m = gmc_r_measure(&f, 0.5).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&f.theta_grid, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("theta,density\n"));
    }
}
