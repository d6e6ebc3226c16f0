//! The Szegő recursion.
//!
//! With the convention
//!
//! ```text
//! Φ_{k+1}(z)  = z Φ_k(z) - conj(α_k) Φ*_k(z)
//! Φ*_{k+1}(z) = Φ*_k(z)  - α_k z Φ_k(z)
//! ```
//!
//! this module evaluates the monic orthogonal polynomials pointwise and in
//! coefficient space, the Blaschke ratio `Q_n = z Φ_n / Φ*_n`, the
//! continuous logarithm of `Φ*_n` on the disc, and the two directions of the
//! finite Verblunsky map (coefficients to moments, and back by the Schur
//! algorithm).

use num_complex::Complex64;

use crate::sampling::VerblunskySequence;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Coefficient threshold above which the Schur algorithm reports a
/// degenerate (finitely supported) measure.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// One recursion step at a point: `(zφ - conj(α)φ*, φ* - αzφ)`.
#[inline]
pub fn szego_step(
    phi: Complex64,
    phi_star: Complex64,
    alpha: Complex64,
    z: Complex64,
) -> (Complex64, Complex64) {
    let zphi = z * phi;
    (zphi - alpha.conj() * phi_star, phi_star - alpha * zphi)
}

/// Coefficients (ascending powers) of `Φ_n` and `Φ*_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpucPair {
    pub phi: Vec<Complex64>,
    pub phi_star: Vec<Complex64>,
}

impl OpucPair {
    pub fn degree(&self) -> usize {
        self.phi.len() - 1
    }

    pub fn eval_phi(&self, z: Complex64) -> Complex64 {
        horner(&self.phi, z)
    }

    pub fn eval_phi_star(&self, z: Complex64) -> Complex64 {
        horner(&self.phi_star, z)
    }

    /// Largest `|phi_star[k] - conj(phi[n-k])|`.
    pub fn reversal_defect(&self) -> f64 {
        let n = self.degree();
        (0..=n).map(|k| (self.phi_star[k] - self.phi[n - k].conj()).norm()).fold(0.0, f64::max)
    }
}

/// Evaluates a polynomial given by ascending coefficients.
pub fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
}

/// Runs the recursion in coefficient space over every coefficient of
/// `seq`, the terminal one included.
pub fn szego_coefficients(seq: &VerblunskySequence) -> OpucPair {
    let coeffs = seq.coefficients();
    let mut phi = Vec::with_capacity(coeffs.len() + 1);
    let mut phi_star = Vec::with_capacity(coeffs.len() + 1);
    phi.push(ONE);
    phi_star.push(ONE);
    for &alpha in &coeffs {
        advance_coefficients(&mut phi, &mut phi_star, alpha);
    }
    OpucPair { phi, phi_star }
}

/// In-place update `(Φ, Φ*) -> (zΦ - ᾱΦ*, Φ* - αzΦ)`.
fn advance_coefficients(phi: &mut Vec<Complex64>, phi_star: &mut Vec<Complex64>, alpha: Complex64) {
    let d = phi.len();
    phi.push(ZERO);
    phi_star.push(ZERO);
    let ac = alpha.conj();
    for k in (0..=d).rev() {
        let shifted = if k > 0 { phi[k - 1] } else { ZERO };
        let new_phi = shifted - ac * phi_star[k];
        let new_star = phi_star[k] - alpha * shifted;
        phi[k] = new_phi;
        phi_star[k] = new_star;
    }
}

/// `(Φ_n(z), Φ*_n(z))` by pointwise recursion.
pub fn evaluate(seq: &VerblunskySequence, z: Complex64) -> (Complex64, Complex64) {
    seq.coefficients().into_iter().fold((ONE, ONE), |(p, ps), a| szego_step(p, ps, a, z))
}

/// `Q_0(z), …, Q_n(z)` through `Q_{j+1} = z (Q_j - ᾱ_j) / (1 - α_j Q_j)`.
pub fn q_trajectory(seq: &VerblunskySequence, z: Complex64) -> Result<Vec<Complex64>> {
    if z.norm() > 1.0 + 1e-14 {
        return Err(Error::Domain(format!("|z| = {} exceeds 1", z.norm())));
    }
    let coeffs = seq.coefficients();
    let mut out = Vec::with_capacity(coeffs.len() + 1);
    let mut q = z;
    out.push(q);
    for (j, &a) in coeffs.iter().enumerate() {
        let denom = ONE - a * q;
        if denom.norm() < 1e-300 {
            return Err(Error::Singularity(format!("Phi*_{} vanishes at z = {z}", j + 1)));
        }
        q = z * (q - a.conj()) / denom;
        out.push(q);
    }
    Ok(out)
}

/// The Blaschke ratio `Q_n(z) = z Φ_n(z) / Φ*_n(z)`, `n = seq.degree()`.
pub fn q_ratio(seq: &VerblunskySequence, z: Complex64) -> Result<Complex64> {
    Ok(*q_trajectory(seq, z)?.last().expect("trajectory is never empty"))
}

/// The continuous determination of `log Φ*_n(z)` on the open disc that
/// vanishes at `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDetermination {
    pub value: Complex64,
}

impl LogDetermination {
    pub fn exp(&self) -> Complex64 {
        self.value.exp()
    }
}

/// `Σ_j Log(1 - α_j Q_j(z))` with principal logarithms.
///
/// `|α_j Q_j(z)| < 1` inside the disc, so each factor stays in the right
/// half-plane and the principal branch is continuous in `z`.
pub fn log_phi_star(seq: &VerblunskySequence, z: Complex64) -> Result<LogDetermination> {
    if !(z.norm() < 1.0) {
        return Err(Error::Domain(format!("log Phi* needs |z| < 1, got {}", z.norm())));
    }
    let qs = q_trajectory(seq, z)?;
    let value = seq.coefficients().iter().zip(&qs).map(|(&a, &q)| (ONE - a * q).ln()).sum();
    Ok(LogDetermination { value })
}

/// Taylor coefficients `l_1, …, l_{k_max}` of `log p(z)` for a polynomial
/// with `p(0) = 1`, from `k l_k = k p_k - Σ_{j<k} j l_j p_{k-j}`.
pub fn log_taylor_coefficients(poly: &[Complex64], k_max: usize) -> Result<Vec<Complex64>> {
    if poly.first().is_none_or(|&p0| (p0 - ONE).norm() > 1e-12) {
        return Err(Error::Parameter("log series needs p(0) = 1".into()));
    }
    let p = |k: usize| poly.get(k).copied().unwrap_or(ZERO);
    let mut l = vec![ZERO; k_max + 1];
    for k in 1..=k_max {
        let mut acc = p(k) * k as f64;
        for (j, lj) in l.iter().enumerate().take(k).skip(1) {
            acc -= lj * p(k - j) * j as f64;
        }
        l[k] = acc / k as f64;
    }
    l.remove(0);
    Ok(l)
}

/// Moments `c_m = ∫ e^{-imθ} dμ`, `m = 1..=m_max`, of the measure with
/// Verblunsky coefficients `seq`.
///
/// Orthogonality of `Φ_m` to the constants gives
/// `c_m = -Σ_{k<m} conj(φ_{m,k}) c_k`, where `φ_{m,k}` are the coefficients
/// of `Φ_m`; this determines `c_m` from `α_0..α_{m-1}` exactly.
pub fn moments_from_alphas(seq: &VerblunskySequence, m_max: usize) -> Result<Vec<Complex64>> {
    let coeffs = seq.coefficients();
    if m_max > coeffs.len() {
        return Err(Error::Parameter(format!(
            "{m_max} moments requested but only {} coefficients available",
            coeffs.len()
        )));
    }
    let mut moments = vec![ONE];
    let mut phi = vec![ONE];
    let mut phi_star = vec![ONE];
    for &alpha in coeffs.iter().take(m_max) {
        advance_coefficients(&mut phi, &mut phi_star, alpha);
        let m = phi.len() - 1;
        let c: Complex64 = -(0..m).map(|k| phi[k].conj() * moments[k]).sum::<Complex64>();
        moments.push(c);
    }
    moments.remove(0);
    Ok(moments)
}

/// Recovers `α_0, …, α_{n-1}` from the moments `c_1, …, c_n` (Schur /
/// Levinson recursion).
///
/// At step `k`, `conj(α_k) = ∫ z Φ_k dμ / ‖Φ_k‖²` with
/// `∫ z^j dμ = conj(c_j)`. A coefficient of modulus `≥ 1 - 1e-10` means the
/// moments belong to a measure with at most `k + 1` atoms.
pub fn schur_inverse(moments: &[Complex64], n: usize) -> Result<VerblunskySequence> {
    if moments.len() < n {
        return Err(Error::Parameter(format!("need {n} moments, got {}", moments.len())));
    }
    let c = |j: usize| if j == 0 { ONE } else { moments[j - 1] };
    let mut phi = vec![ONE];
    let mut phi_star = vec![ONE];
    let mut norm2 = 1.0;
    let mut alphas = Vec::with_capacity(n);
    for k in 0..n {
        let z_phi: Complex64 = (0..=k).map(|j| phi[j] * c(j + 1).conj()).sum();
        let alpha = (z_phi / norm2).conj();
        let modulus = alpha.norm();
        if !(modulus < 1.0 - DEGENERACY_TOL) {
            return Err(Error::DegenerateMeasure { index: k, modulus });
        }
        alphas.push(alpha);
        advance_coefficients(&mut phi, &mut phi_star, alpha);
        norm2 *= 1.0 - alpha.norm_sqr();
    }
    VerblunskySequence::new(alphas, None)
}
