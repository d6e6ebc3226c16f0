//! Orthogonal polynomials on the unit circle (OPUC), circular beta ensembles
//! and Gaussian multiplicative chaos on the circle.
//!
//! The crate is organised bottom-up:
//!
//! - [`sampling`]: Killip–Nenciu Verblunsky coefficients and complex Gaussians.
//! - [`opuc`]: the Szegő recursion, Blaschke ratios, moments and the Schur inverse map.
//! - [`cmv`]: CMV matrices, traces of powers and para-orthogonal spectra.
//! - [`measures`]: Bernstein–Szegő densities, circle quadrature and total-mass products.
//! - [`gmc`]: the Poisson-regularised Gaussian field and its chaos measure.
//! - [`sde`]: the `|Q_j(r)|²` chain, its diffusive limit and Dufresne's perpetuity.
//! - [`analysis`]: special functions, KS tests and moment estimators.
//! - [`montecarlo`]: seed derivation and deterministic replica fan-out.

// Negated comparisons deliberately reject NaN arguments.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cmv;
mod error;
pub mod gmc;
pub mod measures;
pub mod montecarlo;
pub mod opuc;
pub mod sampling;
pub mod sde;

pub use error::{Error, Result};
pub use num_complex::Complex64;
