use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::{erf, gamma};

use crate::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Real log-Gamma.
pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// A branch of `log Γ(z)` for complex `z` (Lanczos, g = 7).
///
/// The imaginary part is not the principal continuous branch, but
/// `exp(ln_gamma_complex(z)) = Γ(z)` to near machine precision.
pub fn ln_gamma_complex(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Err(Error::Singularity(format!("Gamma has a pole at {}", z.re)));
    }
    if z.re < 0.5 {
        // Reflection: Γ(z) Γ(1-z) = π / sin(πz).
        let sin = (z * PI).sin();
        return Ok(Complex64::new(PI.ln(), 0.0) - sin.ln() - ln_gamma_complex(1.0 - z)?);
    }
    let z = z - 1.0;
    let mut acc = Complex64::new(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln())
}

pub fn gamma_complex(z: Complex64) -> Result<Complex64> {
    Ok(ln_gamma_complex(z)?.exp())
}

/// CDF of the standard normal scaled to `N(mean, sd²)`.
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * erf::erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
}

/// CDF of `scale / G` with `G ~ Gamma(shape, 1)`.
pub fn inverse_gamma_cdf(shape: f64, scale: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    gamma::gamma_ur(shape, scale / x)
}

const CIRCLE_MOMENT_MAX_TERMS: usize = 100_000;

/// `E|1 - e^{iΘ} u|^{-2λ}` for `Θ` uniform, as the series
/// `Σ_k binom(λ+k-1, k)² |u|^{2k}`.
///
/// Terms are generated by their ratio `((λ+k-1)/k)² |u|²`; summation stops
/// once the geometric bound on the remaining tail falls below
/// `tol · partial_sum`, or after 10⁵ terms.
pub fn circle_moment_series(lambda: f64, u: Complex64, tol: f64) -> Result<f64> {
    let x = u.norm_sqr();
    if !(x < 1.0) {
        return Err(Error::Domain(format!("|u| must be < 1, got {}", u.norm())));
    }
    if !(tol > 0.0) {
        return Err(Error::Parameter("tolerance must be positive".into()));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..CIRCLE_MOMENT_MAX_TERMS {
        let c = (lambda + k as f64 - 1.0) / k as f64;
        term *= c * c * x;
        sum += term;
        if term == 0.0 {
            break;
        }
        let next = (lambda + k as f64) / (k as f64 + 1.0);
        let ratio = next * next * x;
        if ratio < 1.0 && term * ratio / (1.0 - ratio) < tol * sum {
            break;
        }
    }
    Ok(sum)
}

/// The same expectation by the periodic rectangle rule on `n_points` angles.
pub fn circle_moment_numeric(lambda: f64, u: Complex64, n_points: usize) -> Result<f64> {
    if !(u.norm() < 1.0) {
        return Err(Error::Domain(format!("|u| must be < 1, got {}", u.norm())));
    }
    if n_points == 0 {
        return Err(Error::Parameter("need at least one quadrature point".into()));
    }
    let h = 2.0 * PI / n_points as f64;
    let sum: f64 = (0..n_points)
        .map(|k| {
            let w = Complex64::from_polar(1.0, h * k as f64) * u;
            (1.0 - w).norm_sqr().powf(-lambda)
        })
        .sum();
    Ok(sum / n_points as f64)
}
