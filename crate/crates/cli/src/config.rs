use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Reproducible numerical experiments on circular beta ensembles,
/// orthogonal polynomials on the unit circle and Gaussian multiplicative chaos.
#[derive(Debug, Parser)]
#[command(name = "chaos-opuc", version)]
pub struct Cli {
    #[command(subcommand)]
    pub experiment: Experiment,
}

/// Flags shared by every experiment.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Master seed; replica streams are derived from it.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Worker threads (0 = all cores).
    #[arg(long, env = "CHAOS_OPUC_THREADS", default_value_t = 0)]
    pub threads: usize,

    /// Output prefix for `<prefix>.report.json` and `<prefix>.samples.csv`;
    /// defaults to the experiment name.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Experiment {
    /// Law of the total-mass product C0 against the Fyodorov-Bouchaud CDF.
    VerifyFb(VerifyFb),
    /// Coefficients of -log Phi*_n against tr(C^k)/k.
    TraceIdentity(TraceIdentity),
    /// Discrete |Q_j(r)|^2 chain against Euler-Maruyama at a fixed time.
    SdeCompare(SdeCompare),
    /// Eigenangles and quadrature weights of circular beta ensembles.
    SampleCbe(SampleCbe),
    /// Exactness of para-orthogonal quadrature on z^m.
    QuadratureCheck(QuadratureCheck),
    /// Total mass of the regularised chaos against C0.
    MassCompare(MassCompare),
    /// E|c1|^2, closed forms of c2 and c3, and the moment bound for Phi*_n.
    MomentCheck(MomentCheck),
    /// Gaussianity of CMV traces and of lagged coefficient products.
    GaussianityTraces(GaussianityTraces),
    /// Dufresne's perpetuity against the inverse-gamma law.
    Dufresne(Dufresne),
    /// Small-time entrance law of the diffusion.
    EntranceLaw(EntranceLaw),
    /// Series for E|1 - e^{iT} u|^{-2 lambda} against angular integration.
    CircleMoment(CircleMoment),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::VerifyFb(_) => "verify-fb",
            Self::TraceIdentity(_) => "trace-identity",
            Self::SdeCompare(_) => "sde-compare",
            Self::SampleCbe(_) => "sample-cbe",
            Self::QuadratureCheck(_) => "quadrature-check",
            Self::MassCompare(_) => "mass-compare",
            Self::MomentCheck(_) => "moment-check",
            Self::GaussianityTraces(_) => "gaussianity-traces",
            Self::Dufresne(_) => "dufresne",
            Self::EntranceLaw(_) => "entrance-law",
            Self::CircleMoment(_) => "circle-moment",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Self::VerifyFb(a) => &a.common,
            Self::TraceIdentity(a) => &a.common,
            Self::SdeCompare(a) => &a.common,
            Self::SampleCbe(a) => &a.common,
            Self::QuadratureCheck(a) => &a.common,
            Self::MassCompare(a) => &a.common,
            Self::MomentCheck(a) => &a.common,
            Self::GaussianityTraces(a) => &a.common,
            Self::Dufresne(a) => &a.common,
            Self::EntranceLaw(a) => &a.common,
            Self::CircleMoment(a) => &a.common,
        }
    }

    /// The full configuration as JSON, for the report header.
    pub fn echo(&self) -> serde_json::Value {
        let v = match self {
            Self::VerifyFb(a) => serde_json::to_value(a),
            Self::TraceIdentity(a) => serde_json::to_value(a),
            Self::SdeCompare(a) => serde_json::to_value(a),
            Self::SampleCbe(a) => serde_json::to_value(a),
            Self::QuadratureCheck(a) => serde_json::to_value(a),
            Self::MassCompare(a) => serde_json::to_value(a),
            Self::MomentCheck(a) => serde_json::to_value(a),
            Self::GaussianityTraces(a) => serde_json::to_value(a),
            Self::Dufresne(a) => serde_json::to_value(a),
            Self::EntranceLaw(a) => serde_json::to_value(a),
            Self::CircleMoment(a) => serde_json::to_value(a),
        };
        v.unwrap_or(serde_json::Value::Null)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyFb {
    #[arg(long, default_value_t = 4.0)]
    pub beta: f64,
    /// Truncation of the infinite product.
    #[arg(long = "J", default_value_t = 100_000)]
    pub truncation: usize,
    #[arg(long, default_value_t = 10_000)]
    pub replicas: usize,
    #[arg(long, default_value_t = 0.02)]
    pub ks_threshold: f64,
    /// Largest admissible |z|-score of E[C0] against 1.
    #[arg(long, default_value_t = 3.0)]
    pub z_threshold: f64,
    /// Largest admissible relative error of E[1/C0].
    #[arg(long, default_value_t = 0.02)]
    pub moment_rel_tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TraceIdentity {
    #[arg(long, default_value_t = 4.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub kmax: usize,
    /// Number of random sequences.
    #[arg(long, default_value_t = 20)]
    pub replicas: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SdeCompare {
    #[arg(long, default_value_t = 4.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.999)]
    pub r: f64,
    #[arg(long, default_value_t = 0.1)]
    pub t_start: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 5000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0.05)]
    pub ks_threshold: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleCbe {
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    /// Largest admissible distance between companion roots and CMV eigenvalues.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QuadratureCheck {
    #[arg(long, default_value_t = 4.0)]
    pub beta: f64,
    /// Largest number of nodes; instances cycle through 1..=n.
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub replicas: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MassCompare {
    #[arg(long, default_value_t = 4.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.99)]
    pub r: f64,
    /// Number of Gaussian modes in the field.
    #[arg(long = "K", default_value_t = 4000)]
    pub k_max: usize,
    /// Grid size on the circle.
    #[arg(long = "M", default_value_t = 8192)]
    pub grid: usize,
    /// Truncation of the C0 product.
    #[arg(long = "J", default_value_t = 100_000)]
    pub truncation: usize,
    #[arg(long, default_value_t = 5000)]
    pub replicas: usize,
    #[arg(long, default_value_t = 0.05)]
    pub ks_threshold: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MomentCheck {
    #[arg(long, default_value_t = 4.0)]
    pub beta: f64,
    /// Samples of |c1|^2.
    #[arg(long, default_value_t = 100_000)]
    pub replicas: usize,
    /// Degree of Phi*_n in the moment bound.
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Real evaluation point of the moment bound.
    #[arg(long, default_value_t = 0.5)]
    pub z: f64,
    /// Samples of |Phi*_n(z)|^2.
    #[arg(long, default_value_t = 10_000)]
    pub bound_replicas: usize,
    #[arg(long, default_value_t = 3.0)]
    pub z_threshold: f64,
    /// Tolerance of the closed forms of c2 and c3 against quadrature.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GaussianityTraces {
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub kmax: usize,
    #[arg(long, default_value_t = 10_000)]
    pub replicas: usize,
    #[arg(long, default_value_t = 0.05)]
    pub rel_tol: f64,
    /// Coupling used for the lagged-product sums.
    #[arg(long, default_value_t = 4.0)]
    pub sum_beta: f64,
    /// Last index of the lagged-product sums.
    #[arg(long = "J", default_value_t = 10_000)]
    pub j_max: usize,
    #[arg(long, default_value_t = 0.02)]
    pub ks_threshold: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Dufresne {
    /// Drift of the Brownian motion.
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Integration horizon; defaults to max(10, 5/b).
    #[arg(long)]
    pub w_max: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub replicas: usize,
    #[arg(long, default_value_t = 0.02)]
    pub ks_threshold: f64,
    #[arg(long, default_value_t = 3.0)]
    pub z_threshold: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EntranceLaw {
    #[arg(long, default_value_t = 6.0)]
    pub beta: f64,
    /// Observation time, at most 0.01.
    #[arg(long, default_value_t = 0.002)]
    pub t: f64,
    #[arg(long, default_value_t = 0.999_999)]
    pub r: f64,
    #[arg(long, default_value_t = 20_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0.05)]
    pub ks_threshold: f64,
    #[arg(long, default_value_t = 0.1)]
    pub mean_rel_tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CircleMoment {
    /// Exponents; the default grid is 0.5, 1, 2, 3.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 3.0])]
    pub lambda: Vec<f64>,
    /// Moduli of u; the default grid is 0, 0.2, 0.4, 0.6, 0.8.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.2, 0.4, 0.6, 0.8])]
    pub u: Vec<f64>,
    /// Angular points of the numerical integral.
    #[arg(long, default_value_t = 4096)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub common: Common,
}
