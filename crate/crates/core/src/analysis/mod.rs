//! Special functions and the statistical machinery used to check
//! distributional identities.

mod report;
mod special;
mod stats;

pub use report::TestReport;
pub use special::{
    circle_moment_numeric, circle_moment_series, gamma_complex, inverse_gamma_cdf, ln_gamma,
    ln_gamma_complex, normal_cdf,
};
pub use stats::{
    empirical_moment, kolmogorov_survival, ks_one_sample, ks_test, ks_two_sample, quantile, KsReference,
    KsResult, MomentEstimate,
};
