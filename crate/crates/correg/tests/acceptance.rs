//! End-to-end acceptance suite.
//!
//! Each test exercises one headline capability of the crate and prints a
//! single PASS/FAIL verdict line (visible with `--nocapture`); a FAIL also
//! panics with the measured numbers.

use correg::correlation::{ar1_correlation, block_correlation, CovarianceModel, SignVector};
use correg::estimator::{
    ar1_precision, estimator_covariance, two_point_mean_variance, DesignMatrix,
};
use correg::monte_carlo::{empirical_estimator_covariance, peelle_demo, McConfig};
use correg::sampling::{
    delta_at_max_variance, inverse_variance_asymptotic, inverse_variance_exact, limiting_variance,
    SamplingPlan, SnrProfile,
};
use correg::subspace::{column_space_membership, limiting_direction};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::process::Command;

fn verdict(criterion: usize, description: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {criterion:02} [{status}] {description}: {detail}");
    assert!(pass, "acceptance {criterion:02} ({description}): {detail}");
}

/// Two-measurement covariance matrix for noise levels (σ₁, σ₂) and
/// correlation ρ.
fn pair_sigma(s1: f64, s2: f64, rho: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2])
}

fn ones_design(n: usize) -> DesignMatrix {
    DesignMatrix::new(DMatrix::from_element(n, 1, 1.0)).unwrap()
}

#[test]
fn acceptance_01_two_point_closed_form() {
    let v = two_point_mean_variance(1.0, 0.5, 0.5).unwrap();
    let mut worst = (v - 0.25).abs();
    let mut pass = worst <= 1e-12;

    // Equal noise levels: variance approaches σ² as ρ → 1 (and equals it at
    // the boundary).
    let tied_boundary = two_point_mean_variance(1.0, 1.0, 1.0).unwrap();
    let tied_near = two_point_mean_variance(1.0, 1.0, 1.0 - 1e-9).unwrap();
    pass &= tied_boundary == 1.0 && (tied_near - 1.0).abs() <= 1e-6;

    // Distinct noise levels: variance collapses at both correlation
    // extremes.
    let mut collapse_max: f64 = 0.0;
    for &(s1, s2) in &[(1.0, 0.5), (1.0, 0.75), (2.0, 1.0), (1.5, 0.5), (1.0, 2.0)] {
        for &rho in &[1.0 - 1e-8, -(1.0 - 1e-8)] {
            let v = two_point_mean_variance(s1, s2, rho).unwrap();
            collapse_max = collapse_max.max(v);
            pass &= v < 1e-6;
        }
    }
    worst = worst.max(collapse_max);

    verdict(
        1,
        "two-point closed form",
        pass,
        &format!(
            "V(1,0.5,0.5) err {:.2e}, tied boundary {tied_boundary}, \
             collapse max {collapse_max:.2e} (worst {worst:.2e})",
            (v - 0.25).abs()
        ),
    );
}

#[test]
fn acceptance_02_matrix_agrees_with_closed_form() {
    let x = ones_design(2);
    let sigma2_values = [0.5, 0.75, 0.95, 1.0, 1.05, 1.25, 1.5];
    let mut worst = 0.0f64;
    for i in 0..100 {
        // 100 points strictly inside (−0.999, 0.999).
        let rho = -0.999 + (i as f64 + 0.5) * (1.998 / 100.0);
        for &s2 in &sigma2_values {
            let closed = two_point_mean_variance(1.0, s2, rho).unwrap();
            let v = estimator_covariance(&x, &pair_sigma(1.0, s2, rho)).unwrap();
            let rel = (v[(0, 0)] - closed).abs() / closed;
            worst = worst.max(rel);
        }
    }
    verdict(
        2,
        "matrix solve matches closed form on the 700-point sweep",
        worst <= 1e-10,
        &format!("worst relative difference {worst:.3e} (tolerance 1e-10)"),
    );
}

/// Random full-rank design with the requested shape; entries in [−2, 2].
fn random_design(rng: &mut ChaCha12Rng, n: usize, m: usize) -> DesignMatrix {
    loop {
        let entries: Vec<f64> = (0..n * m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let candidate = DMatrix::from_vec(n, m, entries);
        if let Ok(design) = DesignMatrix::new(candidate) {
            if design.is_full_rank() {
                return design;
            }
        }
    }
}

fn trace(m: &DMatrix<f64>) -> f64 {
    m.diagonal().sum()
}

#[test]
fn acceptance_03_variance_collapse_toward_full_correlation() {
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    let mut worst_ratio = 0.0f64;
    let mut worst_floor = f64::INFINITY;

    for case in 0..20 {
        let n = 3 + case % 6; // 3..=8
        let m = 1 + case % (n - 1); // < n
        let sigmas: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
        let v1 = limiting_direction(&sigmas, &SignVector::plus(n).unwrap()).unwrap();

        // Generic design: keep sampling until v₁ is genuinely outside the
        // column space (residual ≥ 0.1).
        let design = loop {
            let candidate = random_design(&mut rng, n, m);
            let membership = column_space_membership(&candidate, &v1, 1e-8).unwrap();
            if membership.residual >= 0.1 {
                break candidate;
            }
        };
        let trace_at = |design: &DesignMatrix, k: i32| -> f64 {
            let rho = 1.0 - 10f64.powi(-k);
            let model =
                CovarianceModel::new(sigmas.clone(), ar1_correlation(n, rho).unwrap()).unwrap();
            trace(&estimator_covariance(design, &model.assemble()).unwrap())
        };
        let ratio = trace_at(&design, 6) / trace_at(&design, 1);
        worst_ratio = worst_ratio.max(ratio);

        // Design with v₁ planted in the column space: variance must not
        // collapse.
        let mut planted = DMatrix::zeros(n, m);
        planted.set_column(0, &v1);
        for j in 1..m {
            for i in 0..n {
                planted[(i, j)] = rng.gen_range(-2.0..2.0);
            }
        }
        let planted = DesignMatrix::new(planted).unwrap();
        assert!(planted.is_full_rank(), "planted design degenerate");
        let floor = trace_at(&planted, 6)
            / (0.5 * sigmas.iter().cloned().fold(f64::INFINITY, f64::min).powi(2));
        worst_floor = worst_floor.min(floor);
    }

    let pass = worst_ratio < 1e-3 && worst_floor > 1.0;
    verdict(
        3,
        "trace(V) collapses near full correlation iff v1 leaves the column space",
        pass,
        &format!(
            "worst collapse ratio {worst_ratio:.3e} (< 1e-3), \
             worst planted floor multiple {worst_floor:.3} (> 1 of 0.5·min σ²)"
        ),
    );
}

#[test]
fn acceptance_04_sampling_closed_form_matches_dense_quadratic_form() {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let intervals = rng.gen_range(1..=64usize);
        let points = intervals + 1;
        let target_rho: f64 = rng.gen_range(0.001..0.999);
        let delta = -1.0 / (intervals as f64 * target_rho.ln());
        let values: Vec<f64> = (0..points).map(|_| rng.gen_range(0.2..2.0)).collect();
        let profile = SnrProfile::tabulated(values.clone()).unwrap();
        let plan = SamplingPlan::new(intervals, delta, profile).unwrap();

        let closed = inverse_variance_exact(&plan).unwrap();
        let precision = ar1_precision(points, plan.rho()).unwrap();
        let dense = precision.quadratic_form(&values, &values).unwrap();
        worst = worst.max(((closed - dense) / dense).abs());
    }
    verdict(
        4,
        "inverse-variance closed form equals tridiagonal quadratic form",
        worst <= 1e-11,
        &format!("worst relative difference {worst:.3e} over 50 random cases"),
    );
}

#[test]
fn acceptance_05_asymptotic_gap_second_order() {
    let delta = 1.0;
    let profile = SnrProfile::linear(1.0, 1.0).unwrap();
    let gap = |n: usize| -> f64 {
        let exact =
            inverse_variance_exact(&SamplingPlan::new(n, delta, profile.clone()).unwrap()).unwrap();
        let asym = inverse_variance_asymptotic(&profile, delta, n)
            .unwrap()
            .leading;
        ((exact - asym) / exact).abs()
    };
    let mut min_shrink = f64::INFINITY;
    for &n in &[16usize, 32, 64] {
        min_shrink = min_shrink.min(gap(n) / gap(2 * n));
    }
    verdict(
        5,
        "exact-vs-asymptotic gap shrinks second order under n doubling",
        min_shrink >= 3.5,
        &format!("minimum shrink factor {min_shrink:.4} (required ≥ 3.5)"),
    );
}

#[test]
fn acceptance_06_limiting_variance_special_cases() {
    // Constant profile: exact algebraic identity 2δ/(2δ+1).
    let constant = SnrProfile::linear(1.0, 0.0).unwrap();
    let mut worst = 0.0f64;
    for i in 0..61 {
        let delta = 0.01 * (100.0f64 / 0.01).powf(i as f64 / 60.0);
        let v = limiting_variance(&constant, delta).unwrap();
        let exact = 2.0 * delta / (2.0 * delta + 1.0);
        worst = worst.max(((v - exact) / exact).abs());
    }
    let identity_pass = worst <= 1e-14;

    // Linear profile: the analytic maximizer agrees with a grid search at
    // 1e-3 resolution.
    let mut worst_offset = 0.0f64;
    for &alpha in &[0.5, 1.0, 2.0] {
        let profile = SnrProfile::linear(1.0, alpha).unwrap();
        let analytic = delta_at_max_variance(&profile).unwrap();
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut delta = (analytic - 0.5).max(1e-3);
        while delta <= analytic + 0.5 {
            let v = limiting_variance(&profile, delta).unwrap();
            if v > best.0 {
                best = (v, delta);
            }
            delta += 1e-3;
        }
        worst_offset = worst_offset.max((best.1 - analytic).abs());
    }
    let search_pass = worst_offset <= 1e-3 + 1e-12;

    verdict(
        6,
        "limiting variance identities (constant and linear profiles)",
        identity_pass && search_pass,
        &format!(
            "constant-profile worst rel err {worst:.2e} (≤ 1e-14), \
             maximizer grid offset {worst_offset:.2e} (≤ 1e-3)"
        ),
    );
}

/// Parses a figure CSV into (header, rows).
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .expect("csv has a header")
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|f| f.parse::<f64>().expect("numeric csv field"))
                .collect()
        })
        .collect();
    (header, rows)
}

fn run_figure(dir: &std::path::Path, args: &[&str], file: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let out = dir.join(file);
    let status = Command::new(env!("CARGO_BIN_EXE_correg"))
        .args(args)
        .arg("--out")
        .arg(&out)
        .status()
        .expect("figure command runs");
    assert!(status.success(), "figure command failed: {args:?}");
    parse_csv(&std::fs::read_to_string(&out).expect("figure csv readable"))
}

#[test]
fn acceptance_07_figure_outputs_show_expected_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut notes = Vec::new();

    // Two-point sweep: every series vanishes at ρ = −1; at ρ = +1 only the
    // equal-noise series survives (at exactly σ² = 1).
    let (header, rows) = run_figure(dir.path(), &["fig1"], "fig1.csv");
    let first = rows.first().unwrap();
    let last = rows.last().unwrap();
    assert_eq!(first[0], -1.0);
    assert_eq!(last[0], 1.0);
    let at_minus_one_ok = first[1..].iter().all(|&v| v == 0.0);
    let mut at_plus_one_ok = true;
    for (name, &value) in header[1..].iter().zip(&last[1..]) {
        if name == "sigma2=1" {
            at_plus_one_ok &= value == 1.0;
        } else {
            at_plus_one_ok &= value.abs() <= 1e-12;
        }
    }
    pass &= at_minus_one_ok && at_plus_one_ok;
    notes.push(format!(
        "two-point sweep endpoints {}",
        if at_minus_one_ok && at_plus_one_ok {
            "exact"
        } else {
            "WRONG"
        }
    ));

    // Variance vs. n: the uncorrelated series scales like 1/(n+1) — exactly
    // for a flat profile, within a narrow band for the default ramp — and
    // correlated series plateau once n exceeds 1/δ.
    let (header4, rows4) = run_figure(dir.path(), &["fig4", "--alpha", "0"], "fig4_flat.csv");
    let delta0 = header4.iter().position(|h| h == "delta=0").unwrap();
    let flat_exact = rows4
        .iter()
        .all(|r| (r[delta0] * (r[0] + 1.0) - 1.0).abs() <= 1e-12);
    pass &= flat_exact;
    notes.push(format!(
        "flat-profile uncorrelated variance ∝ 1/(n+1): {}",
        if flat_exact { "exact" } else { "WRONG" }
    ));

    let (header4d, rows4d) = run_figure(dir.path(), &["fig4"], "fig4.csv");
    let mut band = (f64::INFINITY, 0.0f64);
    for r in &rows4d {
        let scaled = r[delta0] * (r[0] + 1.0);
        band = (band.0.min(scaled), band.1.max(scaled));
    }
    let band_ok = band.0 >= 1.55 && band.1 <= 1.75;
    pass &= band_ok;
    notes.push(format!(
        "ramp-profile uncorrelated n-scaling band [{:.3}, {:.3}]",
        band.0, band.1
    ));

    let mut worst_step = 0.0f64;
    for (j, name) in header4d.iter().enumerate().skip(1) {
        let delta: f64 = name.strip_prefix("delta=").unwrap().parse().unwrap();
        if delta == 0.0 {
            continue;
        }
        for w in rows4d.windows(2) {
            let (n_prev, v_prev, v_next) = (w[0][0], w[0][j], w[1][j]);
            if n_prev > 1.0 / delta {
                worst_step = worst_step.max(((v_next - v_prev) / v_prev).abs());
            }
        }
    }
    pass &= worst_step < 0.01;
    notes.push(format!(
        "correlated plateau worst relative step {worst_step:.4} (< 0.01)"
    ));

    // Variance vs. δ for a constant profile: the n → ∞ series climbs to 1.
    let (header5, rows5) = run_figure(dir.path(), &["fig5"], "fig5.csv");
    let limit_col = header5.iter().position(|h| h == "limit").unwrap();
    let limit_first = rows5.first().unwrap()[limit_col];
    let limit_last = rows5.last().unwrap()[limit_col];
    let limit_ok = limit_last > 0.99 && limit_last > limit_first;
    pass &= limit_ok;
    notes.push(format!(
        "constant-profile limit series rises {limit_first:.4} → {limit_last:.5}"
    ));

    // The δ-sweep with the ramp profile also runs and emits both series.
    let (header3, rows3) = run_figure(dir.path(), &["fig3"], "fig3.csv");
    pass &= header3.iter().any(|h| h == "n=2")
        && header3.iter().any(|h| h == "n=7")
        && !rows3.is_empty();

    verdict(
        7,
        "figure data reproduces expected shapes",
        pass,
        &notes.join("; "),
    );
}

#[test]
fn acceptance_08_monte_carlo_validates_analytic_covariance() {
    // Correlated pair: empirical variance within 4 SE of the analytic 0.2.
    let x = ones_design(2);
    let sigma = pair_sigma(1.0, 0.5, 0.8);
    let config = McConfig::new(100_000, 20_260_423, DVector::from_element(1, 0.0));
    let report = empirical_estimator_covariance(&x, &sigma, &config).unwrap();
    let analytic = report.analytic_covariance[(0, 0)];
    let mc_pass = (analytic - 0.2).abs() <= 1e-12
        && report.max_standardized_deviation <= 4.0
        && !report.limit_mode;

    // Rank-one covariance: the limit path recovers β exactly in every trial.
    let sigma_limit = pair_sigma(1.0, 0.5, 1.0);
    let config_limit = McConfig::new(100_000, 7, DVector::from_element(1, 0.7));
    let limit_report = empirical_estimator_covariance(&x, &sigma_limit, &config_limit).unwrap();
    let limit_pass = limit_report.limit_mode
        && limit_report.empirical_covariance[(0, 0)] <= 1e-20
        && limit_report.max_mean_deviation <= 1e-12;

    verdict(
        8,
        "Monte Carlo confirms analytic covariance and exact limit recovery",
        mc_pass && limit_pass,
        &format!(
            "pair deviation {:.3} SE (≤ 4), limit-mode variance {:.2e} (≤ 1e-20)",
            report.max_standardized_deviation,
            limit_report.empirical_covariance[(0, 0)]
        ),
    );
}

#[test]
fn acceptance_09_block_problem_rank_law() {
    // Five measurements: an ordinary correlated pair plus a triple pushed to
    // the brink of full correlation. The limiting covariance has rank
    // r' = 3, so with m = 3 parameters exactly n − r' = 2 combinations are
    // determined exactly — V acquires exactly 2 vanishing eigenvalues.
    let sigmas = vec![1.0, 0.5, 0.8, 1.2, 0.9];
    let correlation = block_correlation(&[
        ar1_correlation(2, 0.3).unwrap(),
        ar1_correlation(3, 1.0 - 1e-10).unwrap(),
    ])
    .unwrap();
    let model = CovarianceModel::new(sigmas, correlation).unwrap();

    let s: Vec<f64> = (0..5).map(|i| i as f64 / 4.0).collect();
    let mut x = DMatrix::zeros(5, 3);
    for i in 0..5 {
        x[(i, 0)] = 1.0;
        x[(i, 1)] = s[i];
        x[(i, 2)] = s[i] * s[i];
    }
    let design = DesignMatrix::new(x).unwrap();

    let v = estimator_covariance(&design, &model.assemble()).unwrap();
    let mut eigs: Vec<f64> = v.symmetric_eigenvalues().iter().cloned().collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let cutoff = 1e-8 * eigs[0];
    let vanishing = eigs.iter().filter(|&&e| e < cutoff).count();

    verdict(
        9,
        "block problem shows exactly n − r' vanishing covariance eigenvalues",
        vanishing == 2,
        &format!(
            "eigenvalues {:?}, cutoff {cutoff:.2e}, vanishing {vanishing} (expected 2)",
            eigs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn acceptance_10_negative_weight_estimates_leave_the_data_range() {
    let trials = 1000;
    let mut outside = 0;
    for trial in 0..trials {
        let record = peelle_demo(1.0, 0.5, 0.99, 2.5, trial).unwrap();
        assert!(
            record.w1 < 0.0,
            "weight w1 = {} not negative at trial {trial}",
            record.w1
        );
        if record.outside_range {
            outside += 1;
        }
    }
    let fraction = outside as f64 / trials as f64;
    verdict(
        10,
        "negative-weight fits land outside the observed data range",
        fraction > 0.5,
        &format!("outside fraction {fraction:.3} over {trials} seeded trials (> 0.5)"),
    );
}
