//! CMV matrices.
//!
//! `C = L·M` with `L = Diag(Θ_0, Θ_2, …)`, `M = Diag(1, Θ_1, Θ_3, …)` and
//! `Θ_j = [[α_j, ρ_j], [ρ_j, -conj(α_j)]]`. The truncation `C_[n]` is the
//! top-left `n×n` block; because `L` and `M` are block diagonal with
//! interleaved blocks, it equals the product of the `n×n` truncations of
//! `L` and `M`, and only `α_0, …, α_{n-1}` enter it. With these conventions
//! `det(1 - z C_[n]) = Φ*_n(z)`, so the eigenvalues of `C_[n]` are the
//! complex conjugates of the zeros of `Φ_n`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::opuc::{horner, szego_coefficients};
use crate::sampling::VerblunskySequence;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// One `Θ_j` block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaBlock {
    pub alpha: Complex64,
    pub rho: f64,
}

impl ThetaBlock {
    pub fn new(alpha: Complex64) -> Self {
        Self { alpha, rho: (1.0 - alpha.norm_sqr()).max(0.0).sqrt() }
    }

    /// Entries `[[a, b], [c, d]]` in row-major order.
    pub fn entries(&self) -> [Complex64; 4] {
        let rho = Complex64::new(self.rho, 0.0);
        [self.alpha, rho, rho, -self.alpha.conj()]
    }

    /// Largest entry of `Θ Θ† - I`.
    pub fn unitarity_defect(&self) -> f64 {
        let [a, b, c, d] = self.entries();
        let m00 = a * a.conj() + b * b.conj() - ONE;
        let m01 = a * c.conj() + b * d.conj();
        let m11 = c * c.conj() + d * d.conj() - ONE;
        m00.norm().max(m01.norm()).max(m11.norm())
    }
}

/// The factors of `C_[n]` together with its sparse rows.
#[derive(Debug, Clone)]
pub struct CmvFactors {
    size: usize,
    alphas: Vec<Complex64>,
    rows: Vec<Vec<(usize, Complex64)>>,
}

/// Builds `C_[n]` from the coefficients of `seq` (terminal included),
/// zero-padded or truncated to length `n`.
pub fn build_cmv(seq: &VerblunskySequence, n: usize) -> Result<CmvFactors> {
    if n == 0 {
        return Err(Error::Parameter("CMV truncation size must be at least 1".into()));
    }
    let mut alphas = seq.coefficients();
    alphas.resize(n, ZERO);
    let mut cmv = CmvFactors { size: n, alphas, rows: Vec::new() };
    cmv.rows = (0..n).map(|i| cmv.sparse_row(i)).collect();
    Ok(cmv)
}

impl CmvFactors {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn alphas(&self) -> &[Complex64] {
        &self.alphas
    }

    pub fn theta(&self, j: usize) -> ThetaBlock {
        ThetaBlock::new(self.alphas[j])
    }

    /// Blocks of `L`: `Θ_0, Θ_2, …`; the last one may straddle the
    /// truncation boundary.
    pub fn l_blocks(&self) -> Vec<ThetaBlock> {
        (0..self.size).step_by(2).map(|j| self.theta(j)).collect()
    }

    /// Blocks of `M` after its leading `1`: `Θ_1, Θ_3, …`.
    pub fn m_blocks(&self) -> Vec<ThetaBlock> {
        (1..self.size).step_by(2).map(|j| self.theta(j)).collect()
    }

    // Entry (i, k) of the infinite block-diagonal matrix whose blocks Θ_j
    // sit on rows/columns (j, j+1) for j ≡ parity (mod 2).
    fn block_entry(&self, parity: usize, i: usize, k: usize) -> Complex64 {
        let start = if i % 2 == parity {
            i
        } else if i > 0 {
            i - 1
        } else {
            usize::MAX
        };
        if start == usize::MAX {
            // Leading 1 of M.
            return if k == 0 { ONE } else { ZERO };
        }
        if k != start && k != start + 1 {
            return ZERO;
        }
        let alpha = self.alphas.get(start).copied().unwrap_or(ZERO);
        let e = ThetaBlock::new(alpha).entries();
        e[2 * (i - start) + (k - start)]
    }

    fn l_entry(&self, i: usize, k: usize) -> Complex64 {
        self.block_entry(0, i, k)
    }

    fn m_entry(&self, i: usize, k: usize) -> Complex64 {
        self.block_entry(1, i, k)
    }

    fn sparse_row(&self, i: usize) -> Vec<(usize, Complex64)> {
        let n = self.size;
        let mut row: Vec<(usize, Complex64)> = Vec::with_capacity(4);
        let lo = i.saturating_sub(2);
        let hi = (i + 3).min(n);
        for j in lo..hi {
            let mut v = ZERO;
            for k in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                v += self.l_entry(i, k) * self.m_entry(k, j);
            }
            if v != ZERO {
                row.push((j, v));
            }
        }
        row
    }

    pub fn l_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.size, self.size, |i, k| self.l_entry(i, k))
    }

    pub fn m_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.size, self.size, |i, k| self.m_entry(i, k))
    }

    /// Dense `C_[n]`.
    pub fn c_matrix(&self) -> DMatrix<Complex64> {
        let mut c = DMatrix::from_element(self.size, self.size, ZERO);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                c[(i, j)] = v;
            }
        }
        c
    }

    /// `y = C x` restricted to the rows `lo..hi`.
    fn apply_window(&self, x: &[Complex64], y: &mut [Complex64], lo: usize, hi: usize) {
        for (yi, row) in y[lo..hi].iter_mut().zip(&self.rows[lo..hi]) {
            *yi = row.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }
}

/// `tr(C_[n]^k)` for `k = 1..=k_max`.
///
/// Column `i` of `C^k` is supported in `[i - 2k, i + 2k]` since `C` is
/// five-diagonal, so each column is propagated on a growing window.
pub fn cmv_trace_powers(cmv: &CmvFactors, k_max: usize) -> Result<Vec<Complex64>> {
    if k_max == 0 {
        return Err(Error::Parameter("k_max must be at least 1".into()));
    }
    let n = cmv.size;
    let mut traces = vec![ZERO; k_max];
    let mut x = vec![ZERO; n];
    let mut y = vec![ZERO; n];
    for i in 0..n {
        x[i] = ONE;
        let (mut lo, mut hi) = (i, i + 1);
        for t in traces.iter_mut() {
            let (nlo, nhi) = (lo.saturating_sub(2), (hi + 2).min(n));
            cmv.apply_window(&x, &mut y, nlo, nhi);
            *t += y[i];
            for v in &mut x[lo..hi] {
                *v = ZERO;
            }
            x[nlo..nhi].copy_from_slice(&y[nlo..nhi]);
            lo = nlo;
            hi = nhi;
        }
        for v in &mut x[lo..hi] {
            *v = ZERO;
        }
    }
    Ok(traces)
}

/// `F_k = Σ_{j≥-1} conj(α_j) ρ²_{j+1}…ρ²_{j+k-1} α_{j+k}` with
/// `α_{-1} = -1`, over the zero-padded coefficients of `seq`.
pub fn trace_leading_term(seq: &VerblunskySequence, k: usize) -> Result<Complex64> {
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    let len = seq.coefficients().len() as isize;
    let k = k as isize;
    let mut total = ZERO;
    for j in -1..len - k {
        let mut rho2 = 1.0;
        for i in (j + 1)..(j + k) {
            rho2 *= 1.0 - seq.alpha(i).norm_sqr();
        }
        total += seq.alpha(j).conj() * seq.alpha(j + k) * rho2;
    }
    Ok(total)
}

/// Quadratic part of `tr(C^k) + k F_k` not covered by `F_k`:
/// `(k/2) Σ_{a+b=k-2} α_a α_b`.
///
/// It comes from walks that pass the boundary coefficient `α_{-1} = -1`
/// twice, so under `α → εα` the residual is of order `ε²` until this term
/// is removed, after which it is `O(ε³)`.
pub fn trace_boundary_correction(seq: &VerblunskySequence, k: usize) -> Result<Complex64> {
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    if k < 2 {
        return Ok(ZERO);
    }
    let m = (k - 2) as isize;
    let sum: Complex64 = (0..=m).map(|a| seq.alpha(a) * seq.alpha(m - a)).sum();
    Ok(sum * (k as f64 / 2.0))
}

/// Eigenangles of the para-orthogonal system: the arguments, in `[0, 2π)`
/// and ascending, of the zeros of `Φ_n` when `α_{n-1} = η` is unimodular.
///
/// Zeros come from the Schur form of the companion matrix and are then
/// polished by Newton steps on `Φ_n` and projected to the circle.
pub fn paraorthogonal_spectrum(seq: &VerblunskySequence) -> Result<Vec<f64>> {
    if seq.terminal().is_none() {
        return Err(Error::Parameter("para-orthogonal spectrum needs a terminal coefficient".into()));
    }
    let pair = szego_coefficients(seq);
    let n = pair.degree();
    let phi = &pair.phi;
    let mut companion = DMatrix::from_element(n, n, ZERO);
    for i in 1..n {
        companion[(i, i - 1)] = ONE;
    }
    for i in 0..n {
        companion[(i, n - 1)] = -phi[i];
    }
    let roots = companion
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Singularity("companion Schur form did not converge".into()))?;
    let dphi: Vec<Complex64> = (1..=n).map(|k| phi[k] * k as f64).collect();
    let mut angles: Vec<f64> = roots
        .iter()
        .map(|&z0| {
            let mut z = z0 / z0.norm();
            for _ in 0..3 {
                let d = horner(&dphi, z);
                if d.norm() == 0.0 {
                    break;
                }
                z -= horner(phi, z) / d;
                z /= z.norm();
            }
            z.arg().rem_euclid(std::f64::consts::TAU)
        })
        .collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    Ok(angles)
}

/// Eigenvalues of the dense `C_[n]` (independent of the companion route).
pub fn cmv_eigenvalues(cmv: &CmvFactors) -> Result<Vec<Complex64>> {
    let eig = cmv
        .c_matrix()
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Singularity("CMV Schur form did not converge".into()))?;
    Ok(eig.iter().copied().collect())
}

/// Smallest circular distance between consecutive sorted angles.
pub fn min_angular_gap(angles: &[f64]) -> f64 {
    if angles.len() < 2 {
        return std::f64::consts::TAU;
    }
    let wrap = angles[0] + std::f64::consts::TAU - angles[angles.len() - 1];
    angles.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opuc::log_taylor_coefficients;
    use crate::sampling::{sample_verblunsky, CouplingParams};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn real_seq(alphas: &[f64], terminal: Option<f64>) -> VerblunskySequence {
        VerblunskySequence::from_real(alphas, terminal).unwrap()
    }

    #[test]
    fn small_examples() {
        let one = build_cmv(&real_seq(&[0.5], None), 1).unwrap();
        assert_eq!(one.c_matrix()[(0, 0)], c(0.5, 0.0));
        let two = build_cmv(&real_seq(&[0.5, 0.2], None), 2).unwrap();
        assert!((two.c_matrix().trace() - c(0.4, 0.0)).norm() < 1e-15);
        assert!(matches!(build_cmv(&real_seq(&[], None), 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn theta_blocks_are_unitary() {
        let seq = sample_verblunsky(CouplingParams::new(1.0).unwrap(), 50, 3, true);
        let cmv = build_cmv(&seq, 51).unwrap();
        for b in cmv.l_blocks().iter().chain(&cmv.m_blocks()) {
            assert!(b.unitarity_defect() < 1e-12);
        }
    }

    #[test]
    fn dense_product_matches_sparse_rows() {
        let seq = sample_verblunsky(CouplingParams::new(2.0).unwrap(), 9, 4, false);
        for n in 1..=9 {
            let cmv = build_cmv(&seq, n).unwrap();
            let diff = cmv.l_matrix() * cmv.m_matrix() - cmv.c_matrix();
            assert!(diff.norm() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn truncation_equals_block_of_larger_product() {
        let seq = sample_verblunsky(CouplingParams::new(3.0).unwrap(), 12, 5, false);
        let big = build_cmv(&seq, 12).unwrap();
        let full = big.l_matrix() * big.m_matrix();
        for n in 1..=10 {
            let cmv = build_cmv(&seq.truncated(n), n).unwrap();
            let block = full.view((0, 0), (n, n)).into_owned();
            assert!((block - cmv.c_matrix()).norm() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn unitary_with_terminal_and_contractive_without() {
        let p = CouplingParams::new(2.0).unwrap();
        for n in [1usize, 2, 7, 64, 256] {
            let seq = sample_verblunsky(p, n - 1, n as u64, true);
            let cmv = build_cmv(&seq, n).unwrap();
            let m = cmv.c_matrix();
            let defect = (m.adjoint() * &m - DMatrix::identity(n, n)).camax();
            assert!(defect < 1e-10, "n={n}");
        }
        let seq = sample_verblunsky(p, 20, 1, false);
        let m = build_cmv(&seq, 20).unwrap().c_matrix();
        let sv = m.singular_values();
        assert!(sv.max() <= 1.0 + 1e-12);
    }

    #[test]
    fn shift_has_traceless_powers() {
        let cmv = build_cmv(&VerblunskySequence::zeros(5), 5).unwrap();
        let tr = cmv_trace_powers(&cmv, 4).unwrap();
        assert!(tr.iter().all(|t| *t == ZERO));
    }

    #[test]
    fn scalar_trace_powers() {
        let cmv = build_cmv(&real_seq(&[0.5], None), 1).unwrap();
        let tr = cmv_trace_powers(&cmv, 6).unwrap();
        let l = log_taylor_coefficients(&[ONE, c(-0.5, 0.0)], 6).unwrap();
        for (k, t) in tr.iter().enumerate() {
            let k1 = (k + 1) as f64;
            assert!((t - c(0.5f64.powi(k as i32 + 1), 0.0)).norm() < 1e-15);
            assert!((t + l[k] * k1).norm() < 1e-15);
        }
        assert!(cmv_trace_powers(&cmv, 0).is_err());
    }

    #[test]
    fn windowed_traces_match_dense_powers() {
        let seq = sample_verblunsky(CouplingParams::new(1.5).unwrap(), 30, 6, true);
        let cmv = build_cmv(&seq, 31).unwrap();
        let tr = cmv_trace_powers(&cmv, 12).unwrap();
        let m = cmv.c_matrix();
        let mut power = m.clone();
        for t in &tr {
            assert!((power.trace() - t).norm() < 1e-12);
            power = &power * &m;
        }
    }

    #[test]
    fn log_trace_identity() {
        let p = CouplingParams::new(4.0).unwrap();
        for seed in 0..10 {
            let seq = sample_verblunsky(p, 8, seed, false);
            let cmv = build_cmv(&seq, 8).unwrap();
            let tr = cmv_trace_powers(&cmv, 10).unwrap();
            let l = log_taylor_coefficients(&szego_coefficients(&seq).phi_star, 10).unwrap();
            for k in 0..10 {
                let lhs = -l[k];
                let rhs = tr[k] / (k + 1) as f64;
                assert!((lhs - rhs).norm() < 1e-10, "seed={seed} k={}", k + 1);
            }
        }
    }

    #[test]
    fn leading_term_examples() {
        let f1 = trace_leading_term(&real_seq(&[0.5, 0.2], None), 1).unwrap();
        assert!((f1 - c(-0.4, 0.0)).norm() < 1e-15);
        for k in 1..5 {
            assert_eq!(trace_leading_term(&VerblunskySequence::zeros(6), k).unwrap(), ZERO);
        }
        assert!(trace_leading_term(&VerblunskySequence::zeros(2), 0).is_err());
    }

    #[test]
    fn first_trace_is_exactly_minus_leading_term() {
        let seq = sample_verblunsky(CouplingParams::new(2.0).unwrap(), 40, 12, false);
        let cmv = build_cmv(&seq, 40).unwrap();
        let t1 = cmv_trace_powers(&cmv, 1).unwrap()[0];
        let f1 = trace_leading_term(&seq, 1).unwrap();
        assert!((t1 + f1).norm() < 1e-13);
    }

    #[test]
    fn corrected_trace_residual_is_at_least_cubic() {
        let params = CouplingParams::new(4.0).unwrap();
        let base = sample_verblunsky(params, 32, 11, false);
        let residual = |eps: f64, k: usize, corrected: bool| {
            let seq = base.scaled(eps).unwrap();
            let tr = cmv_trace_powers(&build_cmv(&seq, 32).unwrap(), k).unwrap()[k - 1];
            let mut r = tr + trace_leading_term(&seq, k).unwrap() * k as f64;
            if corrected {
                r -= trace_boundary_correction(&seq, k).unwrap();
            }
            r.norm()
        };
        for k in 2..=4 {
            let raw = (residual(0.1, k, false) / residual(0.05, k, false)).log2();
            let cubic = (residual(0.1, k, true) / residual(0.05, k, true)).log2();
            assert!((raw - 2.0).abs() < 0.2, "k={k} raw exponent {raw}");
            assert!(cubic > 2.8, "k={k} corrected exponent {cubic}");
        }
    }

    #[test]
    fn paraorthogonal_examples() {
        let one = paraorthogonal_spectrum(&real_seq(&[], Some(1.0))).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].min(2.0 * PI - one[0]) < 1e-14);
        let two = paraorthogonal_spectrum(&real_seq(&[0.0], Some(1.0))).unwrap();
        assert_eq!(two.len(), 2);
        let zero_dist = two[0].min(2.0 * PI - two[1]);
        assert!(zero_dist < 1e-14, "{two:?}");
        assert!(two.iter().any(|t| (t - PI).abs() < 1e-14));
        assert!(matches!(paraorthogonal_spectrum(&real_seq(&[0.1], None)), Err(Error::Parameter(_))));
    }

    #[test]
    fn companion_roots_match_cmv_eigenvalues() {
        let p = CouplingParams::new(2.0).unwrap();
        for n in [3usize, 8, 20, 40] {
            let seq = sample_verblunsky(p, n - 1, 100 + n as u64, true);
            let angles = paraorthogonal_spectrum(&seq).unwrap();
            assert_eq!(angles.len(), n);
            let eig = cmv_eigenvalues(&build_cmv(&seq, n).unwrap()).unwrap();
            for e in &eig {
                assert!((e.norm() - 1.0).abs() < 1e-8);
            }
            let mut conj: Vec<f64> = eig.iter().map(|e| e.conj().arg().rem_euclid(2.0 * PI)).collect();
            conj.sort_by(|a, b| a.total_cmp(b));
            for (a, b) in angles.iter().zip(&conj) {
                let d = (a - b).abs();
                assert!(d.min(2.0 * PI - d) < 1e-8, "n={n}");
            }
            assert!(angles.windows(2).all(|w| w[0] <= w[1]));
            assert!(angles.iter().all(|&t| (0.0..2.0 * PI).contains(&t)));
        }
    }

    #[test]
    fn gap_law_of_two_point_cue() {
        // At β = 2, n = 2 the density of the separation δ ∈ [0, π] of the
        // two eigenangles is ∝ |1 - e^{iδ}|² = 2 - 2cos δ, giving
        // CDF (δ - sin δ)/π.
        let p = CouplingParams::new(2.0).unwrap();
        let gaps: Vec<f64> = (0..100_000u64)
            .map(|seed| {
                let s = paraorthogonal_spectrum(&sample_verblunsky(p, 1, seed, true)).unwrap();
                let d = s[1] - s[0];
                d.min(2.0 * PI - d)
            })
            .collect();
        let ks = crate::analysis::ks_one_sample(&gaps, |d| (d - d.sin()) / PI).unwrap();
        assert!(ks.statistic < 1.63 / (gaps.len() as f64).sqrt(), "{ks:?}");
    }

    #[test]
    fn min_gap_is_circular() {
        assert!((min_angular_gap(&[0.1, 3.0, 6.2]) - (0.1 + 2.0 * PI - 6.2)).abs() < 1e-15);
        assert_eq!(min_angular_gap(&[1.0]), 2.0 * PI);
    }

    proptest! {
        #[test]
        fn log_trace_identity_random(seed in 0u64..5000, n in 1usize..=16, beta in 0.5f64..8.0) {
            let p = CouplingParams::new(beta).unwrap();
            let seq = sample_verblunsky(p, n, seed, false);
            let tr = cmv_trace_powers(&build_cmv(&seq, n).unwrap(), 10).unwrap();
            let l = log_taylor_coefficients(&szego_coefficients(&seq).phi_star, 10).unwrap();
            for k in 0..10 {
                prop_assert!((tr[k] / (k + 1) as f64 + l[k]).norm() < 1e-10);
            }
        }
    }
}
