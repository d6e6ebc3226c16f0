//! The radial process `X_j = |Q_j(r)|²`, its diffusive limit
//!
//! ```text
//! d(1-X) = X dt - (1-X)² 2dt/(βt) + 4(1-X)X dt/(βt) + sqrt((1-X)² 4X/(βt)) dB
//! ```
//!
//! on the clock `t = j log(1/r²)`, the Dufresne perpetuity and the entrance
//! law of the diffusion at `t = 0`.
//!
//! The discrete process can be driven either by independent Verblunsky
//! coefficients ([`PathMeasure::Base`]) or under the size-biased law that
//! weights each step by `(1-|α_jQ_j|²)/|1-α_jQ_j|²`
//! ([`PathMeasure::Tilted`]). The diffusion describes the latter: given the
//! past, the modulus of `α_j` keeps its law and the phase of `α_j Q_j` follows
//! the Poisson kernel at `|α_j Q_j|`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::{empirical_moment, ks_test, KsReference, TestReport};
use crate::montecarlo::{replica_rng, ReplicaPool, StreamTag};
use crate::sampling::{CouplingParams, VerblunskySequence, VerblunskyStream};
use crate::{Error, Result};

/// Floor of the step-wise check of the `1 - |Q_{j+1}|²` recurrence.
pub const RECURRENCE_TOL: f64 = 1e-12;

/// Rounding in `Q` near the circle is carried along by the Möbius steps with
/// constant hyperbolic size, so the admissible discrepancy is relative to
/// `1 - |Q|²` and grows by roughly `ε / (1 - |Q|²)` per step.
#[derive(Debug, Clone, Copy, Default)]
struct IdentityBudget {
    relative: f64,
}

impl IdentityBudget {
    fn check(&mut self, step: usize, q: Complex64, one_minus: f64) -> Result<()> {
        self.relative += 64.0 * f64::EPSILON / one_minus.max(f64::MIN_POSITIVE);
        let residual = (1.0 - q.norm_sqr()) - one_minus;
        if residual.abs() > RECURRENCE_TOL.max(self.relative * one_minus) {
            return Err(Error::IdentityViolation { step, residual });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathSource {
    DiscreteOpuc,
    EulerMaruyama,
}

/// A path of `X` on an increasing time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub source: PathSource,
    /// Number of steps at which the value had to be clamped into `[0, 1]`.
    pub clamp_events: usize,
}

impl SdePath {
    pub fn last(&self) -> f64 {
        *self.values.last().expect("paths are never empty")
    }

    /// Columns `t,x`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x"])?;
        for (t, x) in self.times.iter().zip(&self.values) {
            w.write_record([t.to_string(), x.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Clock step `log(1/r²)` of the discrete process.
pub fn clock_step(r: f64) -> f64 {
    -2.0 * r.ln()
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("radius must lie in (0, 1), got {r}")));
    }
    Ok(())
}

/// One step of `Q ↦ r(Q - ᾱ)/(1 - αQ)`, returning the new `Q` and
/// `1 - |Q_new|²` from `(1-r²) + r²(1-|α|²)(1-|Q|²)/|1-αQ|²`.
#[inline]
fn q_step(q: Complex64, one_minus: f64, alpha: Complex64, r: f64) -> (Complex64, f64) {
    let denom = Complex64::new(1.0, 0.0) - alpha * q;
    let next = r * (q - alpha.conj()) / denom;
    let r2 = r * r;
    let rec = (1.0 - r2) + r2 * (1.0 - alpha.norm_sqr()) * one_minus / denom.norm_sqr();
    (next, rec)
}

/// `|Q_j(r)|²` for `j = 0..=j_max`, computed by the ratio update and
/// checked against the modulus recurrence at every step.
pub fn q_modulus_recurrence(seq: &VerblunskySequence, r: f64, j_max: usize) -> Result<Vec<f64>> {
    check_radius(r)?;
    if j_max > seq.len() {
        return Err(Error::Parameter(format!("need {j_max} coefficients, have {}", seq.len())));
    }
    let mut q = Complex64::new(r, 0.0);
    let mut one_minus = 1.0 - r * r;
    let mut budget = IdentityBudget::default();
    let mut out = Vec::with_capacity(j_max + 1);
    out.push(q.norm_sqr());
    for (j, &a) in seq.alphas()[..j_max].iter().enumerate() {
        (q, one_minus) = q_step(q, one_minus, a, r);
        budget.check(j + 1, q, one_minus)?;
        out.push(q.norm_sqr());
    }
    Ok(out)
}

/// Law of the Verblunsky coefficients driving the discrete process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMeasure {
    Base,
    Tilted,
}

/// Phase of `α` under the tilted law: `α Q = |α||Q| W` with `W` the image of
/// a uniform point under `v ↦ (v + u)/(1 + uv)`, `u = |α||Q|`.
fn tilted_alpha<R: Rng>(rng: &mut R, modulus: f64, q: Complex64) -> Complex64 {
    let v = Complex64::from_polar(1.0, 2.0 * PI * rng.random::<f64>());
    let qn = q.norm();
    if qn == 0.0 {
        return v * modulus;
    }
    let u = modulus * qn;
    let w = (v + u) / (1.0 + u * v);
    w * q.conj() * (modulus / qn)
}

/// Samples the discrete process and records `X` at `times` (linear
/// interpolation between clock ticks).
pub fn discrete_x_at<R: Rng>(
    params: CouplingParams,
    r: f64,
    times: &[f64],
    measure: PathMeasure,
    rng: &mut R,
) -> Result<SdePath> {
    check_radius(r)?;
    if times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Parameter("recording times must be nonnegative and sorted".into()));
    }
    let h = clock_step(r);
    let last = times.last().copied().unwrap_or(0.0);
    let steps = (last / h).floor() as usize + 1;
    let mut stream = VerblunskyStream::new(params, rng);
    let mut q = Complex64::new(r, 0.0);
    let mut one_minus = 1.0 - r * r;
    let mut budget = IdentityBudget::default();
    let mut xs = Vec::with_capacity(steps + 1);
    xs.push(q.norm_sqr());
    for j in 0..steps {
        let alpha = match measure {
            PathMeasure::Base => stream.next_draw().alpha,
            PathMeasure::Tilted => stream.advance_with_phase(|rng, m| tilted_alpha(rng, m, q)).alpha,
        };
        (q, one_minus) = q_step(q, one_minus, alpha, r);
        budget.check(j + 1, q, one_minus)?;
        xs.push(q.norm_sqr());
    }
    let values = times
        .iter()
        .map(|&t| {
            let s = t / h;
            let j = (s.floor() as usize).min(steps - 1);
            let f = s - j as f64;
            xs[j] * (1.0 - f) + xs[j + 1] * f
        })
        .collect();
    Ok(SdePath { times: times.to_vec(), values, source: PathSource::DiscreteOpuc, clamp_events: 0 })
}

/// Drift and squared diffusion coefficient of `Y = 1 - X`.
#[inline]
fn coefficients(beta: f64, t: f64, x: f64) -> (f64, f64) {
    let y = 1.0 - x;
    let bt = beta * t;
    (x - 2.0 * y * y / bt + 4.0 * y * x / bt, 4.0 * y * y * x / bt)
}

/// Euler–Maruyama from `(t0, x0)` driven by the given Brownian increments,
/// one per step of size `dt`. Returns the final value and the number of
/// clamp events.
pub fn euler_maruyama_increments(
    params: CouplingParams,
    t0: f64,
    x0: f64,
    dt: f64,
    increments: &[f64],
) -> Result<(f64, usize)> {
    check_start(t0, x0, dt)?;
    let beta = params.beta();
    let mut x = x0;
    let mut clamps = 0;
    for (i, &dw) in increments.iter().enumerate() {
        let t = t0 + i as f64 * dt;
        let (drift, var) = coefficients(beta, t, x);
        let y = (1.0 - x) + drift * dt + var.max(0.0).sqrt() * dw;
        x = 1.0 - y;
        if !(0.0..=1.0).contains(&x) {
            x = x.clamp(0.0, 1.0);
            clamps += 1;
        }
    }
    Ok((x, clamps))
}

fn check_start(t0: f64, x0: f64, dt: f64) -> Result<()> {
    if !(t0 > 0.0) {
        return Err(Error::Domain(format!("the diffusion must start at t0 > 0, got {t0}")));
    }
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::Parameter(format!("x0 must lie in [0, 1], got {x0}")));
    }
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// Number of Euler steps of size `dt` covering `[t0, t_end]`.
pub fn step_count(t0: f64, t_end: f64, dt: f64) -> usize {
    ((t_end - t0) / dt).round().max(0.0) as usize
}

/// Full Euler–Maruyama path drawn from `rng`.
pub fn euler_maruyama_with<R: Rng>(
    params: CouplingParams,
    t0: f64,
    x0: f64,
    t_end: f64,
    dt: f64,
    rng: &mut R,
) -> Result<SdePath> {
    check_start(t0, x0, dt)?;
    let n = step_count(t0, t_end, dt);
    let sd = dt.sqrt();
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    times.push(t0);
    values.push(x0);
    let mut x = x0;
    let mut clamp_events = 0;
    for i in 0..n {
        let dw: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
        let (next, c) = euler_maruyama_increments(params, t0 + i as f64 * dt, x, dt, &[dw])?;
        x = next;
        clamp_events += c;
        times.push(t0 + (i + 1) as f64 * dt);
        values.push(x);
    }
    Ok(SdePath { times, values, source: PathSource::EulerMaruyama, clamp_events })
}

/// [`euler_maruyama_with`] on the diffusion stream of `seed`.
pub fn euler_maruyama_x(
    params: CouplingParams,
    t0: f64,
    x0: f64,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<SdePath> {
    euler_maruyama_with(params, t0, x0, t_end, dt, &mut replica_rng(seed, 0, StreamTag::Diffusion))
}

/// Horizon `max(10, 5/b)`.
pub fn dufresne_horizon(b: f64) -> f64 {
    (5.0 / b).max(10.0)
}

/// Trapezoidal `2∫_0^{w_max} exp(-2(W_w + bw)) dw` on a grid of step `dt`;
/// `noise = None` replaces `W` by zero.
pub fn dufresne_with<R: Rng>(b: f64, dt: f64, w_max: f64, noise: Option<&mut R>) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::Parameter(format!("drift b must be positive, got {b}")));
    }
    if !(dt > 0.0 && w_max > 0.0) {
        return Err(Error::Parameter("dt and w_max must be positive".into()));
    }
    let n = (w_max / dt).round().max(1.0) as usize;
    let h = w_max / n as f64;
    let sd = h.sqrt();
    let mut noise = noise;
    let mut w = 0.0;
    let mut prev = 1.0;
    let mut sum = 0.0;
    for i in 1..=n {
        if let Some(rng) = noise.as_deref_mut() {
            w += rng.sample::<f64, _>(StandardNormal) * sd;
        }
        let cur = (-2.0 * (w + b * h * i as f64)).exp();
        sum += 0.5 * (prev + cur) * h;
        prev = cur;
    }
    Ok(2.0 * sum)
}

/// One sample of the perpetuity, whose law is `1/Gamma(b, 1)`.
pub fn dufresne_perpetuity(b: f64, dt: f64, w_max: f64, seed: u64) -> Result<f64> {
    dufresne_with(b, dt, w_max, Some(&mut replica_rng(seed, 0, StreamTag::Dufresne)))
}

/// Settings for [`sde_compare`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeCompareConfig {
    pub r: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub threshold: f64,
}

/// Samples of both routes and their two-sample KS report.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeComparison {
    pub discrete: Vec<f64>,
    pub euler: Vec<f64>,
    pub clamp_events: usize,
    pub report: TestReport,
}

/// Law of `X_{t_end}`: tilted discrete paths versus Euler–Maruyama started
/// at `t_start` from an independent set of discrete values `X_{t_start}`.
pub fn sde_compare(
    params: CouplingParams,
    cfg: &SdeCompareConfig,
    pool: &ReplicaPool,
) -> Result<SdeComparison> {
    check_radius(cfg.r)?;
    check_start(cfg.t_start, 0.0, cfg.dt)?;
    if !(cfg.t_end > cfg.t_start) || cfg.n_paths == 0 {
        return Err(Error::Parameter("need t_end > t_start and at least one path".into()));
    }
    let times = [cfg.t_start, cfg.t_end];
    let discrete: Vec<f64> = pool
        .map(cfg.n_paths, |i| {
            let mut rng = replica_rng(cfg.seed, i, StreamTag::DiscretePath);
            discrete_x_at(params, cfg.r, &times, PathMeasure::Tilted, &mut rng).map(|p| p.values[1])
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let steps = step_count(cfg.t_start, cfg.t_end, cfg.dt);
    let sd = cfg.dt.sqrt();
    let euler: Vec<(f64, usize)> = pool
        .map(cfg.n_paths, |i| {
            let mut rng = replica_rng(cfg.seed, i, StreamTag::Reference);
            let start = discrete_x_at(params, cfg.r, &times[..1], PathMeasure::Tilted, &mut rng)?.values[0];
            let mut noise = replica_rng(cfg.seed, i, StreamTag::Diffusion);
            let dw: Vec<f64> = (0..steps).map(|_| noise.sample::<f64, _>(StandardNormal) * sd).collect();
            euler_maruyama_increments(params, cfg.t_start, start, cfg.dt, &dw)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let clamp_events = euler.iter().map(|e| e.1).sum();
    let euler: Vec<f64> = euler.into_iter().map(|e| e.0).collect();
    let report = ks_test("sde_marginal", &discrete, KsReference::Samples(&euler), cfg.threshold)?
        .with_meta("r", cfg.r)
        .with_meta("t_start", cfg.t_start)
        .with_meta("t_end", cfg.t_end)
        .with_meta("dt", cfg.dt)
        .with_meta("clamp_events", clamp_events);
    Ok(SdeComparison { discrete, euler, clamp_events, report })
}

/// Settings for [`entrance_law_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntranceLawConfig {
    pub t_small: f64,
    pub r: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub ks_threshold: f64,
    /// Allowed relative deviation of the mean.
    pub mean_rel_tol: f64,
}

/// Rescaled samples and the resulting reports.
#[derive(Debug, Clone, PartialEq)]
pub struct EntranceLawOutcome {
    pub rescaled: Vec<f64>,
    pub reference: Vec<f64>,
    pub reports: Vec<TestReport>,
    /// Why the mean check did not run, if it did not.
    pub skipped: Option<String>,
}

/// Compares `(1 - X_t)/t` at `t = t_small` from tilted discrete paths with
/// samples of `β/(2 G)`, `G ~ Gamma(β/2 - 1)`.
pub fn entrance_law_check(
    params: CouplingParams,
    cfg: &EntranceLawConfig,
    pool: &ReplicaPool,
) -> Result<EntranceLawOutcome> {
    let beta = params.beta();
    if !(cfg.t_small > 0.0 && cfg.t_small <= 0.01) {
        return Err(Error::Domain(format!("t_small must lie in (0, 0.01], got {}", cfg.t_small)));
    }
    if beta <= 2.0 {
        return Err(Error::Phase(format!("the entrance law needs beta > 2, got {beta}")));
    }
    check_radius(cfg.r)?;
    if cfg.n_paths == 0 {
        return Err(Error::Parameter("need at least one path".into()));
    }
    let nu = beta / 2.0 - 1.0;
    let gamma = Gamma::new(nu, 1.0).map_err(|e| Error::Parameter(e.to_string()))?;
    let t = cfg.t_small;
    let rescaled: Vec<f64> = pool
        .map(cfg.n_paths, |i| {
            let mut rng = replica_rng(cfg.seed, i, StreamTag::DiscretePath);
            discrete_x_at(params, cfg.r, &[t], PathMeasure::Tilted, &mut rng).map(|p| (1.0 - p.values[0]) / t)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let reference: Vec<f64> = pool.map(cfg.n_paths, |i| {
        let mut rng = replica_rng(cfg.seed, i, StreamTag::Reference);
        beta / (2.0 * gamma.sample(&mut rng))
    });
    let mut reports =
        vec![ks_test("entrance_law_ks", &rescaled, KsReference::Samples(&reference), cfg.ks_threshold)?
            .with_meta("t_small", t)
            .with_meta("r", cfg.r)
            .with_meta("nu", nu)];
    let mut skipped = None;
    if beta > 4.0 {
        let target = beta / (2.0 * (nu - 1.0));
        let est = empirical_moment(&rescaled, |x| *x)?;
        let rel = (est.mean - target).abs() / target;
        reports.push(
            TestReport::new("entrance_law_mean", rel, cfg.mean_rel_tol, rescaled.len())
                .with_meta("mean", est.mean)
                .with_meta("std_error", est.std_error)
                .with_meta("target", target),
        );
    } else {
        skipped = Some(format!("mean of beta/(2 Gamma(nu)) is infinite for beta = {beta} <= 4"));
    }
    Ok(EntranceLawOutcome { rescaled, reference, reports, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{inverse_gamma_cdf, ks_one_sample};
    use crate::montecarlo::{derive_seed, rng_from_seed};
    use crate::sampling::sample_verblunsky;

    #[test]
    fn zero_coefficients_decay_geometrically() {
        let r: f64 = 0.9;
        let xs = q_modulus_recurrence(&VerblunskySequence::zeros(20), r, 20).unwrap();
        for (j, x) in xs.iter().enumerate() {
            assert!((x - r.powi(2 * j as i32 + 2)).abs() < 1e-15);
        }
    }

    #[test]
    fn one_step_recurrence_by_hand() {
        let seq = VerblunskySequence::from_real(&[0.5], None).unwrap();
        let xs = q_modulus_recurrence(&seq, 0.9, 1).unwrap();
        let expected = 0.19 + 0.81 * 0.75 * 0.19 / (1.0f64 - 0.45).powi(2);
        assert!((1.0 - xs[1] - expected).abs() < 1e-12);
        assert!(q_modulus_recurrence(&seq, 0.9, 2).is_err());
        assert!(matches!(q_modulus_recurrence(&seq, 1.0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn recurrence_holds_along_random_trajectories() {
        let p = CouplingParams::new(1.0).unwrap();
        for seed in 0..50 {
            let seq = sample_verblunsky(p, 2000, seed, false);
            let xs = q_modulus_recurrence(&seq, 0.999, 2000).unwrap();
            assert!(xs.iter().all(|x| (0.0..1.0).contains(x)));
        }
    }

    #[test]
    fn conditional_expectation_bound() {
        // r^{2j} |Q_n|² <= E[|Q_{n+j}|² | F_n] <= 1 at β = 4, r = 0.95, n = 10.
        let p = CouplingParams::new(4.0).unwrap();
        let (r, n, jmax) = (0.95f64, 10usize, 50usize);
        let prefix = sample_verblunsky(p, n, 1, false);
        let base = q_modulus_recurrence(&prefix, r, n).unwrap()[n];
        let pool = ReplicaPool::default();
        let paths = pool.map(10_000, |i| {
            let tail = sample_verblunsky(p, jmax, derive_seed(2, i, StreamTag::Verblunsky), false);
            let mut alphas = prefix.alphas().to_vec();
            alphas.extend_from_slice(tail.alphas());
            let seq = VerblunskySequence::new(alphas, None).unwrap();
            q_modulus_recurrence(&seq, r, n + jmax).unwrap()
        });
        for j in 0..=jmax {
            let est = empirical_moment(&paths, |xs| xs[n + j]).unwrap();
            assert!(est.mean + 3.0 * est.std_error >= r.powi(2 * j as i32) * base, "j={j}");
            assert!(est.mean - 3.0 * est.std_error <= 1.0);
        }
    }

    #[test]
    fn tilted_phase_has_poisson_kernel() {
        // Under the tilt, arg(αQ) has density (1-u²)/|1-ue^{iφ}|² w.r.t. dφ/2π,
        // whose CDF on (-π, π] is 1/2 + atan(((1+u)/(1-u)) tan(φ/2))/π.
        let mut rng = rng_from_seed(3);
        let q = Complex64::from_polar(0.8, 1.3);
        let m = 0.6;
        let u = m * 0.8;
        let phases: Vec<f64> = (0..50_000).map(|_| (tilted_alpha(&mut rng, m, q) * q).arg()).collect();
        let k = (1.0 + u) / (1.0 - u);
        let ks = ks_one_sample(&phases, |p| 0.5 + (k * (p / 2.0).tan()).atan() / PI).unwrap();
        assert!(ks.statistic < 1.63 / (phases.len() as f64).sqrt(), "{ks:?}");
        assert!(((tilted_alpha(&mut rng, m, q)).norm() - m).abs() < 1e-14);
    }

    #[test]
    fn discrete_path_interpolates_clock() {
        let p = CouplingParams::new(4.0).unwrap();
        let r = 0.99;
        let h = clock_step(r);
        let mut a = rng_from_seed(5);
        let path = discrete_x_at(p, r, &[0.0, h, 2.5 * h], PathMeasure::Base, &mut a).unwrap();
        let seq = sample_verblunsky(p, 3, 5, false);
        let xs = q_modulus_recurrence(&seq, r, 3).unwrap();
        assert!((path.values[0] - r * r).abs() < 1e-15);
        assert!((path.values[1] - xs[1]).abs() < 1e-14);
        assert!((path.values[2] - 0.5 * (xs[2] + xs[3])).abs() < 1e-14);
        assert!(discrete_x_at(p, r, &[0.5, 0.1], PathMeasure::Base, &mut a).is_err());
    }

    #[test]
    fn deterministic_skeleton() {
        let p = CouplingParams::new(1e12).unwrap();
        let (t0, x0, dt) = (0.5, 0.8, 1e-3);
        let path = euler_maruyama_x(p, t0, x0, 1.5, dt, 1).unwrap();
        let exact = x0 * (-1.0f64).exp();
        assert!((path.last() - exact).abs() < dt, "{} vs {exact}", path.last());
        assert_eq!(path.source, PathSource::EulerMaruyama);
    }

    #[test]
    fn leaves_the_boundary_immediately() {
        let p = CouplingParams::new(6.0).unwrap();
        for seed in 0..1000 {
            let path = euler_maruyama_x(p, 0.5, 1.0, 0.5 + 1e-3, 1e-3, seed).unwrap();
            assert!(path.values[1] < 1.0);
        }
    }

    #[test]
    fn start_validation() {
        let p = CouplingParams::new(4.0).unwrap();
        assert!(matches!(euler_maruyama_x(p, 0.0, 0.5, 1.0, 1e-3, 1), Err(Error::Domain(_))));
        assert!(matches!(euler_maruyama_x(p, 0.1, 1.5, 1.0, 1e-3, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn paths_stay_in_unit_interval_and_are_reproducible() {
        let p = CouplingParams::new(1.0).unwrap();
        let a = euler_maruyama_x(p, 0.05, 0.9, 1.0, 1e-3, 7).unwrap();
        let b = euler_maruyama_x(p, 0.05, 0.9, 1.0, 1e-3, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.values.iter().all(|x| (0.0..=1.0).contains(x)));
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,x\n"));
    }

    #[test]
    fn weak_order_one() {
        // Coupled increments: the coarse path sums pairs of fine increments.
        let p = CouplingParams::new(4.0).unwrap();
        let (t0, t1, x0) = (0.1, 1.0, 0.7);
        let dts = [0.01, 0.005, 0.0025, 0.00125, 0.000625];
        let finest = *dts.last().unwrap();
        let n_fine = step_count(t0, t1, finest);
        let pool = ReplicaPool::default();
        let finals = pool.map(20_000, |i| {
            let mut rng = replica_rng(21, i, StreamTag::Diffusion);
            let fine: Vec<f64> =
                (0..n_fine).map(|_| rng.sample::<f64, _>(StandardNormal) * finest.sqrt()).collect();
            dts.iter()
                .map(|&dt| {
                    let m = (dt / finest).round() as usize;
                    let dw: Vec<f64> = fine.chunks(m).map(|c| c.iter().sum()).collect();
                    euler_maruyama_increments(p, t0, x0, dt, &dw).unwrap().0
                })
                .collect::<Vec<f64>>()
        });
        let means: Vec<f64> =
            (0..dts.len()).map(|k| empirical_moment(&finals, |v| v[k]).unwrap().mean).collect();
        let pts: Vec<(f64, f64)> =
            (0..dts.len() - 1).map(|k| (dts[k].ln(), (means[k] - means[k + 1]).abs().ln())).collect();
        let slope = fit_slope(&pts);
        assert!((slope - 1.0).abs() < 0.3, "slope {slope}, means {means:?}");
    }

    fn fit_slope(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn dufresne_zero_noise() {
        for b in [0.5, 2.0] {
            let w_max = dufresne_horizon(b);
            let v = dufresne_with::<crate::montecarlo::SimRng>(b, 1e-3, w_max, None).unwrap();
            let exact = (1.0 - (-2.0 * b * w_max).exp()) / b;
            assert!((v - exact).abs() < 1e-5, "{v} vs {exact}");
        }
        assert_eq!(dufresne_horizon(0.25), 20.0);
        assert!(dufresne_perpetuity(0.0, 1e-3, 10.0, 1).is_err());
    }

    #[test]
    fn dufresne_law_and_means() {
        let pool = ReplicaPool::default();
        for b in [1.5, 2.0, 3.0] {
            let xs = pool.map(10_000, |i| {
                dufresne_perpetuity(b, 1e-3, dufresne_horizon(b), derive_seed(31, i, StreamTag::Dufresne))
                    .unwrap()
            });
            let est = empirical_moment(&xs, |x| *x).unwrap();
            assert!(est.z_score(1.0 / (b - 1.0)) < 3.0, "b={b} {est:?}");
            if b == 2.0 {
                let ks = ks_one_sample(&xs, |x| inverse_gamma_cdf(b, 1.0, x)).unwrap();
                assert!(ks.statistic < 0.02, "{ks:?}");
            }
        }
    }

    #[test]
    fn entrance_law_guards() {
        let pool = ReplicaPool::sequential();
        let cfg = EntranceLawConfig {
            t_small: 0.0,
            r: 0.999,
            n_paths: 10,
            seed: 1,
            ks_threshold: 0.05,
            mean_rel_tol: 0.1,
        };
        let p = CouplingParams::new(6.0).unwrap();
        assert!(matches!(entrance_law_check(p, &cfg, &pool), Err(Error::Domain(_))));
        let cfg = EntranceLawConfig { t_small: 0.01, ..cfg };
        let low = entrance_law_check(CouplingParams::new(3.0).unwrap(), &cfg, &pool).unwrap();
        assert!(low.skipped.is_some());
        assert_eq!(low.reports.len(), 1);
        assert!(matches!(
            entrance_law_check(CouplingParams::new(2.0).unwrap(), &cfg, &pool),
            Err(Error::Phase(_))
        ));
    }
}
