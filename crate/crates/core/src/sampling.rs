//! Random sources: Killip–Nenciu Verblunsky coefficients and standard
//! complex Gaussians.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::montecarlo::{rng_from_seed, SimRng};
use crate::{Error, Result};

/// Tolerance used when checking that a terminal coefficient is unimodular.
pub const UNIMODULAR_TOL: f64 = 1e-12;

/// Phase of the chaos associated with a coupling constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Subcritical,
    Critical,
    Supercritical,
}

/// Coupling constant `β` together with the derived `γ = sqrt(2/β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    beta: f64,
}

impl CouplingParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Parameter(format!("beta must be positive and finite, got {beta}")));
        }
        Ok(Self { beta })
    }

    /// Parametrises by `γ`, so that `β = 2/γ²`.
    pub fn from_gamma(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Parameter(format!("gamma must be positive and finite, got {gamma}")));
        }
        Self::new(2.0 / (gamma * gamma))
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        (2.0 / self.beta).sqrt()
    }

    pub fn gamma_squared(&self) -> f64 {
        2.0 / self.beta
    }

    /// Second Beta parameter of `|α_j|²`, i.e. `β(j+1)/2`.
    pub fn beta_j(&self, j: usize) -> f64 {
        0.5 * self.beta * (j as f64 + 1.0)
    }

    pub fn phase(&self) -> Phase {
        if self.beta > 2.0 {
            Phase::Subcritical
        } else if self.beta == 2.0 {
            Phase::Critical
        } else {
            Phase::Supercritical
        }
    }
}

/// A finite sequence of Verblunsky coefficients, optionally closed by a
/// unimodular terminal coefficient `η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerblunskySequence {
    alphas: Vec<Complex64>,
    terminal: Option<Complex64>,
    beta: Option<f64>,
}

impl VerblunskySequence {
    /// Convention for the coefficient of index `-1`.
    pub const ALPHA_MINUS_ONE: Complex64 = Complex64::new(-1.0, 0.0);

    /// Validates `|α_j| < 1` and `|η| = 1`.
    pub fn new(alphas: Vec<Complex64>, terminal: Option<Complex64>) -> Result<Self> {
        if let Some(j) = alphas.iter().position(|a| !(a.norm() < 1.0)) {
            return Err(Error::Parameter(format!(
                "interior coefficient alpha_{j} has modulus {} (must be < 1)",
                alphas[j].norm()
            )));
        }
        if let Some(eta) = terminal {
            if (eta.norm() - 1.0).abs() > UNIMODULAR_TOL {
                return Err(Error::Parameter(format!(
                    "terminal coefficient must be unimodular, got modulus {}",
                    eta.norm()
                )));
            }
        }
        Ok(Self { alphas, terminal, beta: None })
    }

    /// Sequence of real coefficients, convenient for hand-made inputs.
    pub fn from_real(alphas: &[f64], terminal: Option<f64>) -> Result<Self> {
        Self::new(
            alphas.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
            terminal.map(|t| Complex64::new(t, 0.0)),
        )
    }

    pub fn zeros(n: usize) -> Self {
        Self { alphas: vec![Complex64::new(0.0, 0.0); n], terminal: None, beta: None }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn with_terminal(mut self, eta: Complex64) -> Result<Self> {
        if (eta.norm() - 1.0).abs() > UNIMODULAR_TOL {
            return Err(Error::Parameter("terminal coefficient must be unimodular".into()));
        }
        self.terminal = Some(eta);
        Ok(self)
    }

    pub fn alphas(&self) -> &[Complex64] {
        &self.alphas
    }

    pub fn terminal(&self) -> Option<Complex64> {
        self.terminal
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    /// Number of interior coefficients.
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty() && self.terminal.is_none()
    }

    /// Degree of the last polynomial of the recursion (interior + terminal).
    pub fn degree(&self) -> usize {
        self.alphas.len() + usize::from(self.terminal.is_some())
    }

    /// All coefficients in recursion order, the terminal one last.
    pub fn coefficients(&self) -> Vec<Complex64> {
        let mut out = self.alphas.clone();
        out.extend(self.terminal);
        out
    }

    /// `α_j` with `α_{-1} = -1` and zero padding past the end.
    pub fn alpha(&self, j: isize) -> Complex64 {
        if j == -1 {
            return Self::ALPHA_MINUS_ONE;
        }
        if j < -1 {
            return Complex64::new(0.0, 0.0);
        }
        let j = j as usize;
        match j.cmp(&self.alphas.len()) {
            std::cmp::Ordering::Less => self.alphas[j],
            std::cmp::Ordering::Equal => self.terminal.unwrap_or_default(),
            std::cmp::Ordering::Greater => Complex64::new(0.0, 0.0),
        }
    }

    /// Multiplies every interior coefficient by `scale` (`|scale| ≤ 1`).
    pub fn scaled(&self, scale: f64) -> Result<Self> {
        Self::new(self.alphas.iter().map(|a| a * scale).collect(), self.terminal)
            .map(|s| Self { beta: self.beta, ..s })
    }

    /// Keeps the first `n` interior coefficients and drops the terminal one.
    pub fn truncated(&self, n: usize) -> Self {
        Self { alphas: self.alphas[..n.min(self.alphas.len())].to_vec(), terminal: None, beta: self.beta }
    }
}

/// One Verblunsky draw: the coefficient and `-log(1-|α|²)` computed without
/// cancellation.
#[derive(Debug, Clone, Copy)]
pub struct VerblunskyDraw {
    pub alpha: Complex64,
    pub neg_log_rho2: f64,
}

/// Lazy stream of independent coefficients `α_0, α_1, …` with the
/// Killip–Nenciu law.
///
/// `|α_j|²` is drawn by inverse CDF as `1 - U^{1/β_j}` and the phase is
/// uniform. Each coefficient consumes exactly two uniforms, modulus first.
pub struct VerblunskyStream<'a, R: Rng> {
    params: CouplingParams,
    rng: &'a mut R,
    index: usize,
}

impl<'a, R: Rng> VerblunskyStream<'a, R> {
    pub fn new(params: CouplingParams, rng: &'a mut R) -> Self {
        Self { params, rng, index: 0 }
    }

    /// Index of the next coefficient.
    pub fn index(&self) -> usize {
        self.index
    }

    /// Draws the next modulus, returning `(|α|, -log(1-|α|²))`.
    pub fn next_modulus(&mut self) -> (f64, f64) {
        let u: f64 = open_unit(self.rng);
        let neg_log_rho2 = -u.ln() / self.params.beta_j(self.index);
        let modulus2 = -(-neg_log_rho2).exp_m1();
        (modulus2.sqrt(), neg_log_rho2)
    }

    /// Draws the next coefficient given its modulus and a phase source.
    pub fn next_draw(&mut self) -> VerblunskyDraw {
        let (modulus, neg_log_rho2) = self.next_modulus();
        let phase = 2.0 * PI * self.rng.random::<f64>();
        self.index += 1;
        VerblunskyDraw { alpha: Complex64::from_polar(modulus, phase), neg_log_rho2 }
    }

    /// Skips the phase draw; keeps the stream aligned with [`Self::next_draw`].
    pub fn next_neg_log_rho2(&mut self) -> f64 {
        let u: f64 = open_unit(self.rng);
        let neg_log_rho2 = -u.ln() / self.params.beta_j(self.index);
        let _: f64 = self.rng.random();
        self.index += 1;
        neg_log_rho2
    }

    /// Draws the next modulus from the stream and lets `phase` turn it into
    /// a coefficient, e.g. under a tilted phase law.
    pub fn advance_with_phase(&mut self, phase: impl FnOnce(&mut R, f64) -> Complex64) -> VerblunskyDraw {
        let (modulus, neg_log_rho2) = self.next_modulus();
        let alpha = phase(self.rng, modulus);
        self.index += 1;
        VerblunskyDraw { alpha, neg_log_rho2 }
    }
}

impl<R: Rng> Iterator for VerblunskyStream<'_, R> {
    type Item = Complex64;

    fn next(&mut self) -> Option<Complex64> {
        Some(self.next_draw().alpha)
    }
}

/// Uniform draw on the open interval `(0, 1)`.
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Uniform point on the unit circle.
pub fn uniform_unimodular<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * rng.random::<f64>())
}

/// Draws `n` coefficients from an existing generator.
pub fn sample_verblunsky_with<R: Rng>(
    params: CouplingParams,
    n: usize,
    with_terminal: bool,
    rng: &mut R,
) -> VerblunskySequence {
    let alphas: Vec<Complex64> = VerblunskyStream::new(params, rng).take(n).collect();
    let terminal = with_terminal.then(|| uniform_unimodular(rng));
    VerblunskySequence { alphas, terminal, beta: Some(params.beta()) }
}

/// Samples `α_0, …, α_{n-1}` (and a uniform terminal `η` on request).
pub fn sample_verblunsky(
    params: CouplingParams,
    n: usize,
    seed: u64,
    with_terminal: bool,
) -> VerblunskySequence {
    let mut rng = rng_from_seed(seed);
    sample_verblunsky_with(params, n, with_terminal, &mut rng)
}

/// `S_J = Σ_{j=-1}^{J} conj(α_j) α_{j+1}` with `α_{-1} = -1`, drawing
/// `α_0, …, α_{J+1}` from `rng`. Each of its real and imaginary parts tends
/// in law to `N(0, 1/β)`.
pub fn lagged_product_sum<R: Rng>(params: CouplingParams, j_max: usize, rng: &mut R) -> Complex64 {
    let mut stream = VerblunskyStream::new(params, rng);
    let mut prev = Complex64::new(-1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for _ in 0..j_max + 2 {
        let next = stream.next_draw().alpha;
        sum += prev.conj() * next;
        prev = next;
    }
    sum
}

/// Independent standard complex Gaussians `N_1, …, N_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexGaussianVector {
    values: Vec<Complex64>,
}

impl ComplexGaussianVector {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn zeros(k_max: usize) -> Self {
        Self { values: vec![Complex64::new(0.0, 0.0); k_max] }
    }

    /// `values()[k-1]` is `N_k`.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Real and imaginary parts are independent `N(0, 1/2)`.
pub fn sample_complex_gaussians_with<R: Rng>(k_max: usize, rng: &mut R) -> ComplexGaussianVector {
    let half = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
    let values = (0..k_max).map(|_| Complex64::new(half.sample(rng), half.sample(rng))).collect();
    ComplexGaussianVector { values }
}

pub fn sample_complex_gaussians(k_max: usize, seed: u64) -> ComplexGaussianVector {
    let mut rng: SimRng = rng_from_seed(seed);
    sample_complex_gaussians_with(k_max, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{empirical_moment, ks_one_sample};
    use crate::montecarlo::{derive_seed, StreamTag};

    #[test]
    fn lagged_sum_matches_explicit_coefficients() {
        let p = CouplingParams::new(4.0).unwrap();
        let seq = sample_verblunsky(p, 7, 21, false);
        let expected: Complex64 = (-1..=5).map(|j| seq.alpha(j).conj() * seq.alpha(j + 1)).sum();
        let got = lagged_product_sum(p, 5, &mut rng_from_seed(21));
        assert!((got - expected).norm() < 1e-14);
    }

    #[test]
    fn coupling_invariants() {
        for beta in [0.5, 2.0, 4.0, 6.0, 123.0] {
            let p = CouplingParams::new(beta).unwrap();
            assert!((p.gamma().powi(2) * p.beta() - 2.0).abs() < 1e-14);
            assert_eq!(p.beta_j(0), beta / 2.0);
        }
        assert_eq!(CouplingParams::new(4.0).unwrap().phase(), Phase::Subcritical);
        assert_eq!(CouplingParams::new(2.0).unwrap().phase(), Phase::Critical);
        assert_eq!(CouplingParams::new(1.0).unwrap().phase(), Phase::Supercritical);
        assert!(matches!(CouplingParams::new(0.0), Err(Error::Parameter(_))));
        assert!(matches!(CouplingParams::new(-1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn sequence_validation_and_convention() {
        assert!(VerblunskySequence::from_real(&[0.5, 1.0], None).is_err());
        assert!(VerblunskySequence::from_real(&[0.5], Some(0.9)).is_err());
        let s = VerblunskySequence::from_real(&[0.5, 0.2], Some(1.0)).unwrap();
        assert_eq!(s.alpha(-1), Complex64::new(-1.0, 0.0));
        assert_eq!(s.alpha(1), Complex64::new(0.2, 0.0));
        assert_eq!(s.alpha(2), Complex64::new(1.0, 0.0));
        assert_eq!(s.alpha(7), Complex64::new(0.0, 0.0));
        assert_eq!(s.degree(), 3);
    }

    #[test]
    fn empty_sequence_with_terminal() {
        let p = CouplingParams::new(3.0).unwrap();
        let s = sample_verblunsky(p, 0, 11, true);
        assert!(s.alphas().is_empty());
        assert!((s.terminal().unwrap().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = CouplingParams::new(4.0).unwrap();
        let a = sample_verblunsky(p, 50, 99, true);
        let b = sample_verblunsky(p, 50, 99, true);
        assert_eq!(a, b);
        assert_ne!(a, sample_verblunsky(p, 50, 100, true));
        assert_eq!(sample_complex_gaussians(8, 5), sample_complex_gaussians(8, 5));
        assert!(sample_complex_gaussians(0, 5).is_empty());
    }

    fn first_coefficients(beta: f64, index: usize, count: usize) -> Vec<Complex64> {
        let p = CouplingParams::new(beta).unwrap();
        (0..count as u64)
            .map(|i| {
                let seq = sample_verblunsky(p, index + 1, derive_seed(2024, i, StreamTag::Verblunsky), false);
                seq.alphas()[index]
            })
            .collect()
    }

    #[test]
    fn modulus_mean_matches_beta_law() {
        let alphas = first_coefficients(2.0, 0, 100_000);
        let est = empirical_moment(&alphas, |a| a.norm_sqr()).unwrap();
        assert!((est.mean - 0.5).abs() < 3.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn log_modulus_mean_matches() {
        for (beta, j) in [(4.0, 0usize), (1.0, 3), (6.0, 2)] {
            let alphas = first_coefficients(beta, j, 20_000);
            let est = empirical_moment(&alphas, |a| -(1.0 - a.norm_sqr()).ln()).unwrap();
            let expected = 2.0 / (beta * (j as f64 + 1.0));
            assert!((est.mean - expected).abs() < 3.0 * est.std_error, "beta={beta} j={j} {est:?}");
        }
    }

    #[test]
    fn modulus_cdf_and_uniform_phase() {
        let beta: f64 = 4.0;
        let j = 1;
        let beta_j = beta * (j as f64 + 1.0) / 2.0;
        let alphas = first_coefficients(beta, j, 100_000);
        let moduli: Vec<f64> = alphas.iter().map(|a| a.norm_sqr()).collect();
        let ks = ks_one_sample(&moduli, |x| 1.0 - (1.0 - x).powf(beta_j)).unwrap();
        assert!(ks.statistic < 0.01, "{ks:?}");

        let phases: Vec<f64> = alphas.iter().map(|a| a.arg().rem_euclid(2.0 * PI)).collect();
        let ks = ks_one_sample(&phases, |x| x / (2.0 * PI)).unwrap();
        assert!(ks.statistic < 0.01, "{ks:?}");

        // Rotating by a fixed unimodular constant leaves the law unchanged.
        let rot = Complex64::from_polar(1.0, 1.234);
        let rotated: Vec<f64> = alphas.iter().map(|a| (a * rot).arg().rem_euclid(2.0 * PI)).collect();
        let ks = ks_one_sample(&rotated, |x| x / (2.0 * PI)).unwrap();
        assert!(ks.statistic < 0.01, "{ks:?}");
    }

    #[test]
    fn complex_gaussian_normalisation() {
        let values: Vec<Complex64> = (0..100_000u64)
            .map(|i| sample_complex_gaussians(1, derive_seed(3, i, StreamTag::Gaussians)).values()[0])
            .collect();
        let abs2 = empirical_moment(&values, |z| z.norm_sqr()).unwrap();
        assert!((abs2.mean - 1.0).abs() < 3.0 * abs2.std_error, "{abs2:?}");
        let re = empirical_moment(&values, |z| (z * z).re).unwrap();
        let im = empirical_moment(&values, |z| (z * z).im).unwrap();
        assert!(re.mean.abs() < 3.0 * re.std_error, "{re:?}");
        assert!(im.mean.abs() < 3.0 * im.std_error, "{im:?}");
    }
}
