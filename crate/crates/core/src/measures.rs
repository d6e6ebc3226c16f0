//! Measures on the circle built from Verblunsky coefficients: the
//! Bernstein–Szegő density, para-orthogonal quadrature, and the random
//! total-mass products `C_0`, `M_∞`, `C_0'`.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::ln_gamma_complex;
use crate::cmv::{min_angular_gap, paraorthogonal_spectrum};
use crate::montecarlo::rng_from_seed;
use crate::opuc::{evaluate, szego_step};
use crate::sampling::{CouplingParams, Phase, VerblunskySequence, VerblunskyStream};
use crate::{Error, Result};

/// Default number of grid points for gridded measures.
pub const DEFAULT_GRID: usize = 4096;

/// Default truncation of the infinite products.
pub const DEFAULT_TRUNCATION: usize = 100_000;

/// Minimal node separation below which a quadrature rule is flagged.
pub const NODE_GAP_WARNING: f64 = 1e-6;

const WEIGHT_SUM_TOL: f64 = 1e-10;

/// A probability measure on the circle, either atomic or given by a density
/// with respect to `dθ/2π` on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralMeasure {
    Atomic { angles: Vec<f64>, weights: Vec<f64> },
    Gridded { theta: Vec<f64>, density: Vec<f64> },
}

impl SpectralMeasure {
    pub fn atomic(angles: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if angles.len() != weights.len() || angles.is_empty() {
            return Err(Error::Parameter("atoms and weights must be nonempty and of equal length".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Parameter("atomic weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Parameter(format!("atomic weights sum to {total}, not 1")));
        }
        Ok(Self::Atomic { angles, weights })
    }

    pub fn gridded(theta: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if theta.len() != density.len() || theta.is_empty() {
            return Err(Error::Parameter("grid and density must be nonempty and of equal length".into()));
        }
        if density.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(Error::Parameter("density must be finite and nonnegative".into()));
        }
        Ok(Self::Gridded { theta, density })
    }

    /// Total mass; for gridded measures the rectangle rule on the grid.
    pub fn total_mass(&self) -> f64 {
        match self {
            Self::Atomic { weights, .. } => weights.iter().sum(),
            Self::Gridded { density, .. } => density.iter().sum::<f64>() / density.len() as f64,
        }
    }

    /// `∫ e^{-imθ} dμ(θ)`.
    pub fn moment(&self, m: i64) -> Complex64 {
        let e = |t: f64| Complex64::from_polar(1.0, -(m as f64) * t);
        match self {
            Self::Atomic { angles, weights } => angles.iter().zip(weights).map(|(&t, &w)| e(t) * w).sum(),
            Self::Gridded { theta, density } => {
                theta.iter().zip(density).map(|(&t, &d)| e(t) * d).sum::<Complex64>() / theta.len() as f64
            }
        }
    }

    /// Two-column CSV: `theta,weight` or `theta,density`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let (header, xs, ys) = match self {
            Self::Atomic { angles, weights } => ("weight", angles, weights),
            Self::Gridded { theta, density } => ("density", theta, density),
        };
        w.write_record(["theta", header])?;
        for (x, y) in xs.iter().zip(ys) {
            w.write_record([x.to_string(), y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `m` equally spaced angles `2πk/m`, `k = 0..m`.
pub fn uniform_grid(m: usize) -> Vec<f64> {
    (0..m).map(|k| TAU * k as f64 / m as f64).collect()
}

/// The density `∏_j (1-|α_j|²) / |Φ*_n(e^{iθ})|²` on `theta_grid`.
pub fn bernstein_szego_density(seq: &VerblunskySequence, theta_grid: &[f64]) -> Result<SpectralMeasure> {
    if seq.terminal().is_some() {
        return Err(Error::Parameter("Bernstein-Szego density needs interior coefficients only".into()));
    }
    let norm: f64 = seq.alphas().iter().map(|a| 1.0 - a.norm_sqr()).product();
    let density = theta_grid
        .iter()
        .map(|&t| norm / evaluate(seq, Complex64::from_polar(1.0, t)).1.norm_sqr())
        .collect();
    SpectralMeasure::gridded(theta_grid.to_vec(), density)
}

/// An atomic quadrature measure with its node-separation diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub measure: SpectralMeasure,
    pub min_gap: f64,
    /// Set when two nodes are closer than [`NODE_GAP_WARNING`].
    pub warning: Option<String>,
}

/// Christoffel weights `1 / Σ_{k<n} |φ_k(z)|²` at a node, with `φ_k` the
/// orthonormal polynomials.
fn christoffel_weight(seq: &VerblunskySequence, z: Complex64) -> f64 {
    let (mut phi, mut star) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
    let mut norm2 = 1.0;
    let mut sum = 1.0;
    for &a in seq.alphas() {
        (phi, star) = szego_step(phi, star, a, z);
        norm2 *= 1.0 - a.norm_sqr();
        sum += phi.norm_sqr() / norm2;
    }
    1.0 / sum
}

/// The `n`-point para-orthogonal quadrature of the measure whose first
/// coefficients are `seq.alphas()`, with `n = seq.degree()`.
pub fn quadrature(seq: &VerblunskySequence) -> Result<QuadratureRule> {
    let angles = paraorthogonal_spectrum(seq)?;
    let weights: Vec<f64> =
        angles.iter().map(|&t| christoffel_weight(seq, Complex64::from_polar(1.0, t))).collect();
    let min_gap = min_angular_gap(&angles);
    let warning = (min_gap < NODE_GAP_WARNING).then(|| {
        format!("quadrature nodes nearly coincide (min gap {min_gap:e}); weights may be inaccurate")
    });
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL && warning.is_none() {
        return Err(Error::IdentityViolation { step: angles.len(), residual: total - 1.0 });
    }
    let weights = weights.iter().map(|w| w / total).collect();
    Ok(QuadratureRule { measure: SpectralMeasure::Atomic { angles, weights }, min_gap, warning })
}

/// Weights solving `Σ_j w_j e^{-imθ_j} = c_m` for `m = 0..n` with `c_0 = 1`
/// and `moments = [c_1, …, c_{n-1}]`.
pub fn weights_by_moment_matching(angles: &[f64], moments: &[Complex64]) -> Result<Vec<f64>> {
    let n = angles.len();
    if moments.len() + 1 < n {
        return Err(Error::Parameter(format!("need {} moments for {n} nodes", n - 1)));
    }
    let v = DMatrix::from_fn(n, n, |m, j| Complex64::from_polar(1.0, -(m as f64) * angles[j]));
    let rhs = DVector::from_fn(n, |m, _| if m == 0 { Complex64::new(1.0, 0.0) } else { moments[m - 1] });
    let sol =
        v.lu().solve(&rhs).ok_or_else(|| Error::Singularity("Vandermonde system is singular".into()))?;
    Ok(sol.iter().map(|w| w.re).collect())
}

/// Which infinite product [`total_mass`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TotalMassVariant {
    /// `∏ (1-|α_j|²)^{-1} (1 - 2/(β(j+1)))`; at `β = 2` the vanishing first
    /// factor `(1 - 2/β)` is replaced by `2`.
    C0,
    /// `∏ (1-|α_j|²)^{-1} e^{-2/(β(j+1))}`.
    MInfinity,
    /// The same product as `MInfinity`, under its supercritical name.
    C0Prime,
}

impl TotalMassVariant {
    /// Logarithm of the deterministic factor at index `j`.
    fn log_factor(self, beta: f64, j: usize) -> f64 {
        let x = 2.0 / (beta * (j + 1) as f64);
        match self {
            Self::C0 if j == 0 && beta == 2.0 => 2f64.ln(),
            Self::C0 => (-x).ln_1p(),
            Self::MInfinity | Self::C0Prime => -x,
        }
    }

    /// `Σ_{j<J}` of [`Self::log_factor`], taking one logarithm per block of
    /// factors.
    fn log_deterministic(self, beta: f64, truncation: usize) -> f64 {
        if self != Self::C0 {
            return (0..truncation).map(|j| self.log_factor(beta, j)).sum();
        }
        let mut log = 0.0;
        let mut start = 0;
        if truncation > 0 && beta == 2.0 {
            log += self.log_factor(beta, 0);
            start = 1;
        }
        let mut block = 1.0;
        for j in start..truncation {
            block *= 1.0 - 2.0 / (beta * (j + 1) as f64);
            if j % 32 == 31 {
                log += block.ln();
                block = 1.0;
            }
        }
        log + block.ln()
    }

    fn check(self, params: CouplingParams) -> Result<()> {
        if self == Self::C0 && params.phase() == Phase::Supercritical {
            return Err(Error::Phase(format!("C0 is defined for beta >= 2 only (beta = {})", params.beta())));
        }
        Ok(())
    }
}

/// One realisation of a truncated total-mass product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalMassSample {
    pub value: f64,
    pub beta: f64,
    pub truncation: usize,
    pub variant: TotalMassVariant,
}

/// Product over `j < truncation`, drawing moduli from `rng` in the same
/// order as [`crate::sampling::sample_verblunsky_with`].
pub fn total_mass_with<R: Rng>(
    params: CouplingParams,
    truncation: usize,
    variant: TotalMassVariant,
    rng: &mut R,
) -> Result<TotalMassSample> {
    variant.check(params)?;
    let beta = params.beta();
    let mut stream = VerblunskyStream::new(params, rng);
    let mut log = variant.log_deterministic(beta, truncation);
    for _ in 0..truncation {
        log += stream.next_neg_log_rho2();
    }
    finish(log, beta, truncation, variant)
}

/// [`total_mass_with`] on a generator seeded by `seed`; the moduli are
/// those of `sample_verblunsky(params, truncation, seed, _)`.
pub fn total_mass(
    params: CouplingParams,
    truncation: usize,
    seed: u64,
    variant: TotalMassVariant,
) -> Result<TotalMassSample> {
    total_mass_with(params, truncation, variant, &mut rng_from_seed(seed))
}

/// The product evaluated on given coefficients.
pub fn total_mass_of_sequence(
    params: CouplingParams,
    seq: &VerblunskySequence,
    variant: TotalMassVariant,
) -> Result<TotalMassSample> {
    variant.check(params)?;
    let beta = params.beta();
    let log = seq
        .alphas()
        .iter()
        .enumerate()
        .map(|(j, a)| -(-a.norm_sqr()).ln_1p() + variant.log_factor(beta, j))
        .sum();
    finish(log, beta, seq.len(), variant)
}

fn finish(log: f64, beta: f64, truncation: usize, variant: TotalMassVariant) -> Result<TotalMassSample> {
    let value = log.exp();
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::Domain(format!("total mass overflowed (log = {log})")));
    }
    Ok(TotalMassSample { value, beta, truncation, variant })
}

/// `E[C_0^z] = Γ(1 - 2z/β) / Γ(1 - 2/β)^z`.
pub fn mellin_reference(params: CouplingParams, z: Complex64) -> Result<Complex64> {
    let beta = params.beta();
    let num = ln_gamma_complex(1.0 - 2.0 * z / beta)?;
    let den = ln_gamma_complex(Complex64::new(1.0 - 2.0 / beta, 0.0))?;
    Ok((num - z * den).exp())
}
