use std::f64::consts::PI;

use chaos_opuc::analysis::{
    circle_moment_numeric, circle_moment_series, empirical_moment, inverse_gamma_cdf, ks_one_sample, ks_test,
    normal_cdf, KsReference, TestReport,
};
use chaos_opuc::cmv::{build_cmv, cmv_eigenvalues, cmv_trace_powers, paraorthogonal_spectrum};
use chaos_opuc::gmc::{fb_cdf, gmc_total_mass_with, FieldSynthesizer};
use chaos_opuc::measures::{
    mellin_reference, quadrature, total_mass_with, SpectralMeasure, TotalMassVariant,
};
use chaos_opuc::montecarlo::{derive_seed, replica_rng, ReplicaPool, StreamTag};
use chaos_opuc::opuc::{evaluate, log_taylor_coefficients, moments_from_alphas, szego_coefficients};
use chaos_opuc::sampling::{lagged_product_sum, sample_verblunsky, CouplingParams, VerblunskySequence};
use chaos_opuc::sde::{
    dufresne_horizon, dufresne_perpetuity, entrance_law_check, sde_compare, EntranceLawConfig,
    SdeCompareConfig,
};
use chaos_opuc::{Complex64, Result};

use crate::config::*;

/// Numeric columns of the samples file, with a description of each.
pub struct Table {
    pub columns: Vec<(&'static str, &'static str)>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(columns: &[(&'static str, &'static str)]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }
}

pub struct Outcome {
    pub reports: Vec<TestReport>,
    pub table: Table,
}

pub fn run(experiment: &Experiment, pool: &ReplicaPool) -> Result<Outcome> {
    match experiment {
        Experiment::VerifyFb(a) => verify_fb(a, pool),
        Experiment::TraceIdentity(a) => trace_identity(a, pool),
        Experiment::SdeCompare(a) => sde(a, pool),
        Experiment::SampleCbe(a) => sample_cbe(a, pool),
        Experiment::QuadratureCheck(a) => quadrature_check(a, pool),
        Experiment::MassCompare(a) => mass_compare(a, pool),
        Experiment::MomentCheck(a) => moment_check(a, pool),
        Experiment::GaussianityTraces(a) => gaussianity(a, pool),
        Experiment::Dufresne(a) => dufresne(a, pool),
        Experiment::EntranceLaw(a) => entrance(a, pool),
        Experiment::CircleMoment(a) => circle_moment(a),
    }
}

fn c0_samples(
    params: CouplingParams,
    truncation: usize,
    count: usize,
    seed: u64,
    pool: &ReplicaPool,
) -> Result<Vec<f64>> {
    pool.map(count, |i| {
        let mut rng = replica_rng(seed, i, StreamTag::TotalMass);
        total_mass_with(params, truncation, TotalMassVariant::C0, &mut rng).map(|s| s.value)
    })
    .into_iter()
    .collect()
}

fn verify_fb(a: &VerifyFb, pool: &ReplicaPool) -> Result<Outcome> {
    let params = CouplingParams::new(a.beta)?;
    let gamma = params.gamma();
    fb_cdf(gamma, 1.0)?;
    let xs = c0_samples(params, a.truncation, a.replicas, a.common.seed, pool)?;
    let cdf = |x: f64| fb_cdf(gamma, x).unwrap_or(f64::NAN);
    let mut reports = vec![ks_test("fb_ks", &xs, KsReference::Cdf(&cdf), a.ks_threshold)?
        .with_meta("gamma", gamma)
        .with_meta("truncation", a.truncation)];
    let mean = empirical_moment(&xs, |x| *x)?;
    reports.push(
        TestReport::new("mean_z_score", mean.z_score(1.0), a.z_threshold, xs.len())
            .with_meta("mean", mean.mean)
            .with_meta("std_error", mean.std_error),
    );
    let target = mellin_reference(params, Complex64::new(-1.0, 0.0))?.re;
    let inv = empirical_moment(&xs, |x| 1.0 / x)?;
    reports.push(
        TestReport::new(
            "inverse_moment_rel_error",
            (inv.mean - target).abs() / target,
            a.moment_rel_tol,
            xs.len(),
        )
        .with_meta("mean", inv.mean)
        .with_meta("target", target),
    );
    let mut table = Table::new(&[("replica", "replica index"), ("c0", "truncated C0 product")]);
    table.rows = xs.iter().enumerate().map(|(i, x)| vec![i as f64, *x]).collect();
    Ok(Outcome { reports, table })
}

fn trace_identity(a: &TraceIdentity, pool: &ReplicaPool) -> Result<Outcome> {
    let params = CouplingParams::new(a.beta)?;
    let rows: Vec<Vec<Vec<f64>>> = pool
        .map(a.replicas, |i| {
            let seq =
                sample_verblunsky(params, a.n, derive_seed(a.common.seed, i, StreamTag::Verblunsky), false);
            let tr = cmv_trace_powers(&build_cmv(&seq, a.n)?, a.kmax)?;
            let l = log_taylor_coefficients(&szego_coefficients(&seq).phi_star, a.kmax)?;
            Ok((0..a.kmax)
                .map(|k| {
                    let lhs = -l[k];
                    let rhs = tr[k] / (k + 1) as f64;
                    vec![i as f64, (k + 1) as f64, lhs.re, lhs.im, rhs.re, rhs.im, (lhs - rhs).norm()]
                })
                .collect())
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
    let worst = rows.iter().map(|r| r[6]).fold(0.0, f64::max);
    let reports = vec![TestReport::new("max_deviation", worst, a.tol, a.replicas)
        .with_meta("n", a.n)
        .with_meta("kmax", a.kmax)];
    let mut table = Table::new(&[
        ("replica", "sequence index"),
        ("k", "power"),
        ("log_re", "real part of -[z^k] log Phi*_n"),
        ("log_im", "imaginary part of -[z^k] log Phi*_n"),
        ("trace_re", "real part of tr(C^k)/k"),
        ("trace_im", "imaginary part of tr(C^k)/k"),
        ("deviation", "modulus of the difference"),
    ]);
    table.rows = rows;
    Ok(Outcome { reports, table })
}

fn sde(a: &SdeCompare, pool: &ReplicaPool) -> Result<Outcome> {
    let params = CouplingParams::new(a.beta)?;
    let cfg = SdeCompareConfig {
        r: a.r,
        t_start: a.t_start,
        t_end: a.t_end,
        dt: a.dt,
        n_paths: a.paths,
        seed: a.common.seed,
        threshold: a.ks_threshold,
    };
    let out = sde_compare(params, &cfg, pool)?;
    let mut table = Table::new(&[
        ("path", "path index"),
        ("discrete", "X at t_end from the discrete chain"),
        ("euler", "X at t_end from Euler-Maruyama"),
    ]);
    table.rows =
        out.discrete.iter().zip(&out.euler).enumerate().map(|(i, (d, e))| vec![i as f64, *d, *e]).collect();
    Ok(Outcome { reports: vec![out.report], table })
}

fn sample_cbe(a: &SampleCbe, pool: &ReplicaPool) -> Result<Outcome> {
    let params = CouplingParams::new(a.beta)?;
    if a.n == 0 {
        return Err(chaos_opuc::Error::Parameter("n must be at least 1".into()));
    }
    let per: Vec<(Vec<Vec<f64>>, f64)> = pool
        .map(a.replicas, |i| {
            let seq = sample_verblunsky(
                params,
                a.n - 1,
                derive_seed(a.common.seed, i, StreamTag::Verblunsky),
                true,
            );
            let rule = quadrature(&seq)?;
            let eig = cmv_eigenvalues(&build_cmv(&seq, a.n)?)?;
            let angles = paraorthogonal_spectrum(&seq)?;
            // CMV eigenvalues are the conjugates of the zeros of Phi_n.
            let defect = angles
                .iter()
                .map(|&t| {
                    let z = Complex64::from_polar(1.0, -t);
                    eig.iter().map(|e| (e - z).norm()).fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max);
            let SpectralMeasure::Atomic { angles, weights } = rule.measure else {
                unreachable!("quadrature is atomic")
            };
            let rows = angles
                .iter()
                .zip(&weights)
                .enumerate()
                .map(|(j, (t, w))| vec![i as f64, j as f64, *t, *w])
                .collect();
            Ok((rows, defect))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let worst = per.iter().map(|p| p.1).fold(0.0, f64::max);
    let reports = vec![TestReport::new("eigen_crosscheck", worst, a.tol, a.replicas).with_meta("n", a.n)];
    let mut table = Table::new(&[
        ("replica", "sample index"),
        ("index", "eigenangle rank"),
        ("angle", "eigenangle in [0, 2 pi)"),
        ("weight", "quadrature weight"),
    ]);
    table.rows = per.into_iter().flat_map(|p| p.0).collect();
    Ok(Outcome { reports, table })
}

fn quadrature_check(a: &QuadratureCheck, pool: &ReplicaPool) -> Result<Outcome> {
    let params = CouplingParams::new(a.beta)?;
    if a.n == 0 {
        return Err(chaos_opuc::Error::Parameter("n must be at least 1".into()));
    }
    let rows: Vec<Vec<Vec<f64>>> = pool
        .map(a.replicas, |i| {
            let n = 1 + (i as usize % a.n);
            let seq =
                sample_verblunsky(params, n - 1, derive_seed(a.common.seed, i, StreamTag::Verblunsky), true);
            let rule = quadrature(&seq)?;
            let moments = moments_from_alphas(&seq, n - 1)?;
            Ok((1..n)
                .map(|m| {
                    let quad = rule.measure.moment(-(m as i64));
                    let exact = moments[m - 1].conj();
                    vec![
                        i as f64,
                        n as f64,
                        m as f64,
                        quad.re,
                        quad.im,
                        exact.re,
                        exact.im,
                        (quad - exact).norm(),
                    ]
                })
                .collect())
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
    let worst = rows.iter().map(|r| r[7]).fold(0.0, f64::max);
    let reports = vec![TestReport::new("max_quadrature_error", worst, a.tol, a.replicas)];
    let mut table = Table::new(&[
        ("replica", "instance index"),
        ("nodes", "number of quadrature nodes"),
        ("m", "power of z"),
        ("quad_re", "real part of the quadrature sum"),
        ("quad_im", "imaginary part of the quadrature sum"),
        ("exact_re", "real part of the integral of z^m"),
        ("exact_im", "imaginary part of the integral of z^m"),
        ("error", "modulus of the difference"),
    ]);
    table.rows = rows;
    Ok(Outcome { reports, table })
}

fn mass_compare(a: &MassCompare, pool: &ReplicaPool) -> Result<Outcome> {
    let params = CouplingParams::new(a.beta)?;
    let gamma = params.gamma();
    fb_cdf(gamma, 1.0)?;
    let synth = FieldSynthesizer::new(a.grid)?;
    let gmc: Vec<f64> = pool
        .map(a.replicas, |i| {
            let mut rng = replica_rng(a.common.seed, i, StreamTag::Field);
            gmc_total_mass_with(&synth, gamma, a.r, a.k_max, &mut rng)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let c0 = c0_samples(params, a.truncation, a.replicas, a.common.seed, pool)?;
    let reports = vec![ks_test("mass_ks", &gmc, KsReference::Samples(&c0), a.ks_threshold)?
        .with_meta("r", a.r)
        .with_meta("K", a.k_max)
        .with_meta("M", a.grid)
        .with_meta("J", a.truncation)];
    let mut table = Table::new(&[
        ("replica", "replica index"),
        ("gmc_mass", "total mass of the regularised chaos"),
        ("c0", "truncated C0 product"),
    ]);
    table.rows = gmc.iter().zip(&c0).enumerate().map(|(i, (g, c))| vec![i as f64, *g, *c]).collect();
    Ok(Outcome { reports, table })
}

fn closed_form_c2_c3(a: &[Complex64; 3]) -> (Complex64, Complex64) {
    let c2 = a[0] * a[0] + a[1] * (1.0 - a[0].norm_sqr());
    let c3 = (a[0] - a[1] * a[0].conj()) * c2
        + a[1] * a[0]
        + a[2] * (1.0 - a[0].norm_sqr()) * (1.0 - a[1].norm_sqr());
    (c2, c3)
}

fn moment_check(a: &MomentCheck, pool: &ReplicaPool) -> Result<Outcome> {
    let params = CouplingParams::new(a.beta)?;
    if a.z.is_nan() || a.z.abs() >= 1.0 {
        return Err(chaos_opuc::Error::Domain(format!("|z| must be < 1, got {}", a.z)));
    }
    let seed = a.common.seed;
    let c1: Vec<f64> = pool
        .map(a.replicas, |i| {
            let seq = sample_verblunsky(params, 1, derive_seed(seed, i, StreamTag::Verblunsky), false);
            moments_from_alphas(&seq, 1).map(|m| m[0].norm_sqr())
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let g2 = params.gamma_squared();
    let target = g2 / (1.0 + g2);
    let est = empirical_moment(&c1, |x| *x)?;
    let mut reports = vec![TestReport::new("c1_second_moment", est.z_score(target), a.z_threshold, c1.len())
        .with_meta("mean", est.mean)
        .with_meta("std_error", est.std_error)
        .with_meta("target", target)];

    let c = Complex64::new;
    let inputs = [
        [c(0.5, 0.0), c(0.2, 0.0), c(0.1, 0.0)],
        [c(0.5, 0.1), c(0.2, -0.3), c(0.1, 0.05)],
        [c(-0.3, 0.6), c(0.0, 0.7), c(-0.4, -0.2)],
    ];
    let mut worst: f64 = 0.0;
    for alphas in &inputs {
        let (c2, c3) = closed_form_c2_c3(alphas);
        let seq = VerblunskySequence::new(alphas.to_vec(), Some(c(1.0, 0.0)))?;
        let measure = quadrature(&seq)?.measure;
        worst = worst.max((measure.moment(2) - c2).norm()).max((measure.moment(3) - c3).norm());
    }
    reports.push(TestReport::new("closed_forms_vs_quadrature", worst, a.tol, inputs.len()));

    let z = c(a.z, 0.0);
    let phi: Vec<f64> = pool.map(a.bound_replicas, |i| {
        let seq = sample_verblunsky(params, a.n, derive_seed(seed, i, StreamTag::Auxiliary), false);
        evaluate(&seq, z).1.norm_sqr()
    });
    let est = empirical_moment(&phi, |x| *x)?;
    let bound = (1.0 - a.z * a.z).powf(-2.0 / a.beta);
    reports.push(
        TestReport::new("phi_star_moment_bound", est.mean - a.z_threshold * est.std_error, bound, phi.len())
            .with_meta("mean", est.mean)
            .with_meta("std_error", est.std_error)
            .with_meta("n", a.n),
    );

    let mut table = Table::new(&[
        ("kind", "1 = |c1|^2 sample, 2 = |Phi*_n(z)|^2 sample"),
        ("replica", "replica index"),
        ("value", "sampled value"),
    ]);
    table.rows = c1
        .iter()
        .enumerate()
        .map(|(i, v)| vec![1.0, i as f64, *v])
        .chain(phi.iter().enumerate().map(|(i, v)| vec![2.0, i as f64, *v]))
        .collect();
    Ok(Outcome { reports, table })
}

fn gaussianity(a: &GaussianityTraces, pool: &ReplicaPool) -> Result<Outcome> {
    let params = CouplingParams::new(a.beta)?;
    if a.n == 0 {
        return Err(chaos_opuc::Error::Parameter("n must be at least 1".into()));
    }
    let seed = a.common.seed;
    let traces: Vec<Vec<Complex64>> = pool
        .map(a.replicas, |i| {
            let seq = sample_verblunsky(params, a.n - 1, derive_seed(seed, i, StreamTag::Verblunsky), true);
            cmv_trace_powers(&build_cmv(&seq, a.n)?, a.kmax)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let mut reports = Vec::new();
    for k in 1..=a.kmax {
        let est = empirical_moment(&traces, |t| t[k - 1].norm_sqr())?;
        let target = 2.0 * k as f64 / a.beta;
        reports.push(
            TestReport::new(
                format!("trace_power_{k}"),
                (est.mean - target).abs() / target,
                a.rel_tol,
                traces.len(),
            )
            .with_meta("mean", est.mean)
            .with_meta("target", target),
        );
    }
    let sum_params = CouplingParams::new(a.sum_beta)?;
    let sums = pool.map(a.replicas, |i| {
        let mut rng = replica_rng(seed, i, StreamTag::Auxiliary);
        lagged_product_sum(sum_params, a.j_max, &mut rng)
    });
    let sd = (1.0 / a.sum_beta).sqrt();
    let cdf = |x: f64| normal_cdf(x, 0.0, sd);
    let re: Vec<f64> = sums.iter().map(|s| s.re).collect();
    let im: Vec<f64> = sums.iter().map(|s| s.im).collect();
    reports.push(
        ks_test("lagged_sum_re_ks", &re, KsReference::Cdf(&cdf), a.ks_threshold)?.with_meta("J", a.j_max),
    );
    reports.push(
        ks_test("lagged_sum_im_ks", &im, KsReference::Cdf(&cdf), a.ks_threshold)?.with_meta("J", a.j_max),
    );

    let mut table = Table::new(&[
        ("kind", "k >= 1: tr(U^k); 0: lagged-product sum S_J"),
        ("replica", "replica index"),
        ("re", "real part"),
        ("im", "imaginary part"),
    ]);
    for (i, t) in traces.iter().enumerate() {
        for (k, v) in t.iter().enumerate() {
            table.rows.push(vec![(k + 1) as f64, i as f64, v.re, v.im]);
        }
    }
    for (i, s) in sums.iter().enumerate() {
        table.rows.push(vec![0.0, i as f64, s.re, s.im]);
    }
    Ok(Outcome { reports, table })
}

fn dufresne(a: &Dufresne, pool: &ReplicaPool) -> Result<Outcome> {
    let w_max = a.w_max.unwrap_or_else(|| dufresne_horizon(a.b));
    let xs: Vec<f64> = pool
        .map(a.replicas, |i| {
            dufresne_perpetuity(a.b, a.dt, w_max, derive_seed(a.common.seed, i, StreamTag::Dufresne))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let cdf = |x: f64| inverse_gamma_cdf(a.b, 1.0, x);
    let ks = ks_one_sample(&xs, cdf)?;
    let mut reports = vec![TestReport::new("dufresne_ks", ks.statistic, a.ks_threshold, xs.len())
        .with_meta("p_value", ks.p_value)
        .with_meta("w_max", w_max)];
    if a.b > 1.0 {
        let est = empirical_moment(&xs, |x| *x)?;
        let target = 1.0 / (a.b - 1.0);
        reports.push(
            TestReport::new("dufresne_mean_z_score", est.z_score(target), a.z_threshold, xs.len())
                .with_meta("mean", est.mean)
                .with_meta("target", target),
        );
    }
    let mut table = Table::new(&[("replica", "replica index"), ("value", "perpetuity sample")]);
    table.rows = xs.iter().enumerate().map(|(i, x)| vec![i as f64, *x]).collect();
    Ok(Outcome { reports, table })
}

fn entrance(a: &EntranceLaw, pool: &ReplicaPool) -> Result<Outcome> {
    let params = CouplingParams::new(a.beta)?;
    let cfg = EntranceLawConfig {
        t_small: a.t,
        r: a.r,
        n_paths: a.paths,
        seed: a.common.seed,
        ks_threshold: a.ks_threshold,
        mean_rel_tol: a.mean_rel_tol,
    };
    let out = entrance_law_check(params, &cfg, pool)?;
    let mut reports = out.reports;
    if let (Some(reason), Some(first)) = (out.skipped, reports.first_mut()) {
        first.insert_meta("mean_check_skipped", reason);
    }
    let mut table = Table::new(&[
        ("path", "path index"),
        ("rescaled", "(1 - X_t)/t from the discrete chain"),
        ("reference", "sample of beta/(2 Gamma(beta/2 - 1))"),
    ]);
    table.rows = out
        .rescaled
        .iter()
        .zip(&out.reference)
        .enumerate()
        .map(|(i, (x, y))| vec![i as f64, *x, *y])
        .collect();
    Ok(Outcome { reports, table })
}

fn circle_moment(a: &CircleMoment) -> Result<Outcome> {
    let mut table = Table::new(&[
        ("lambda", "exponent"),
        ("u_modulus", "|u|"),
        ("u_phase", "arg u"),
        ("series", "series value"),
        ("numeric", "angular integral"),
        ("error", "absolute difference"),
    ]);
    for &lambda in &a.lambda {
        for &m in &a.u {
            for phase in [0.0, 1.0, 0.8 * PI] {
                let u = Complex64::from_polar(m, phase);
                let series = circle_moment_series(lambda, u, 1e-15)?;
                let numeric = circle_moment_numeric(lambda, u, a.points)?;
                table.rows.push(vec![lambda, m, phase, series, numeric, (series - numeric).abs()]);
            }
        }
    }
    let worst = table.rows.iter().map(|r| r[5]).fold(0.0, f64::max);
    let reports = vec![
        TestReport::new("max_series_error", worst, a.tol, table.rows.len()).with_meta("points", a.points)
    ];
    Ok(Outcome { reports, table })
}
