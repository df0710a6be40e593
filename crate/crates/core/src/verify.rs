//! Self-contained oracle checks behind the `verify` CLI command: each check
//! pits a closed form against an independent route (Monte Carlo, finite
//! differences, or a second algebraic path) at pinned seeds, small enough to
//! finish in seconds but sharp enough to catch sign and branch mistakes.

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::datagen::{generate_dataset, sample_beta_star};
use crate::error::Result;
use crate::estimators::{
    dropout_objective_closed, dropout_objective_mc, fit_dropout_diagonal, fit_dropout_spectral,
    fit_ridge, test_risk,
};
use crate::kernel_rf::{feature_dropout_identity, kernel_matrix, KernelSystem};
use crate::linalg::mean_and_se;
use crate::risk_theory::{
    asymptotic_optimal, asymptotic_risk, generalized_dropout_rates, modelwise_optimal_alpha,
    modelwise_risk_given_spectrum, mp_stieltjes, mp_stieltjes_deriv, ridge_optimal_lambda,
    spectral_risk, taylor_risk,
};
use crate::seed::{derive, rng_from, tags};

/// Outcome of a single named check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn within(name: &'static str, observed: f64, expected: f64, tol: f64, detail: String) -> Self {
        CheckResult {
            name,
            passed: (observed - expected).abs() <= tol,
            observed,
            expected,
            tolerance: tol,
            detail,
        }
    }

    fn boolean(name: &'static str, passed: bool, detail: String) -> Self {
        CheckResult {
            name,
            passed,
            observed: if passed { 1.0 } else { 0.0 },
            expected: 1.0,
            tolerance: 0.0,
            detail,
        }
    }
}

const VERIFY_SEED: u64 = 0x5eed_0001;

fn check_spectral_risk_mc() -> Result<CheckResult> {
    // Both regimes, 3000 trials each, against the exact branch formulas.
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for (i, &(n, p)) in [(200usize, 100usize), (100, 200)].iter().enumerate() {
        let gamma = 0.8;
        let sigma2 = 0.25;
        let trials = 3000u64;
        let ex: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let s = derive(VERIFY_SEED, &[i as u64, t]);
                let beta = sample_beta_star(p, derive(s, &[tags::BETA])).unwrap();
                let ds =
                    generate_dataset(n, p, &beta, sigma2, derive(s, &[tags::DATASET])).unwrap();
                let est = fit_dropout_spectral(&ds, gamma).unwrap();
                test_risk(&est, &beta.view(), sigma2).unwrap().0
            })
            .collect();
        let (mean, se) = mean_and_se(&ex);
        let theory = spectral_risk(n, p, gamma, sigma2, 1.0)?.excess.unwrap();
        let z = (mean - theory).abs() / se;
        worst = worst.max(z);
        detail.push_str(&format!("(n={n},p={p}): mc {mean:.5} theory {theory:.5} z={z:.2}; "));
    }
    Ok(CheckResult::boolean(
        "spectral-risk",
        worst <= 3.0,
        format!("{detail}max |z| = {worst:.2} (limit 3)"),
    ))
}

fn check_ridge_equivalence() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for s in 0..20u64 {
        let p = 15;
        let beta = sample_beta_star(p, derive(VERIFY_SEED, &[10, s]))?;
        let ds = generate_dataset(45, p, &beta, 0.25, derive(VERIFY_SEED, &[11, s]))?;
        let g = ds.x.t().dot(&ds.x);
        let m: Vec<f64> = (0..p).map(|i| g[[i, i]]).collect();
        let rates = generalized_dropout_rates(&m, p, 0.25, 1.0)?;
        let a = fit_dropout_diagonal(&ds, &rates)?;
        let b = fit_ridge(&ds, ridge_optimal_lambda(p, 0.25, 1.0)?)?;
        for i in 0..p {
            worst = worst.max((a.beta_hat[i] - b.beta_hat[i]).abs());
        }
    }
    Ok(CheckResult::within(
        "ridge-equivalence",
        worst,
        0.0,
        1e-10,
        format!("max elementwise gap {worst:.3e} over 20 datasets"),
    ))
}

fn check_objective_identity() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for s in 0..20u64 {
        let beta = sample_beta_star(5, derive(VERIFY_SEED, &[20, s]))?;
        let ds = generate_dataset(20, 5, &beta, 0.25, derive(VERIFY_SEED, &[21, s]))?;
        let target = sample_beta_star(5, derive(VERIFY_SEED, &[22, s]))?;
        let gamma = 0.6;
        let closed = dropout_objective_closed(&ds, &target.view(), gamma)?;
        let (mean, se) = dropout_objective_mc(&ds, &target.view(), gamma, 40_000, derive(VERIFY_SEED, &[23, s]))?;
        worst = worst.max((closed - mean).abs() / se);
    }
    Ok(CheckResult::boolean(
        "objective-identity",
        worst <= 3.0,
        format!("max |z| = {worst:.2} over 20 instances (limit 3)"),
    ))
}

fn check_feature_identity() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for s in 0..20u64 {
        let mut rng = rng_from(derive(VERIFY_SEED, &[30, s]));
        let a = Array2::from_shape_fn((8, 5), |_| StandardNormal.sample(&mut rng));
        let y = Array2::from_shape_fn((8, 5), |_| StandardNormal.sample(&mut rng));
        let id = feature_dropout_identity(&a.view(), &y.view(), 0.7, 40_000, derive(VERIFY_SEED, &[31, s]))?;
        worst = worst.max((id.closed - id.mc_mean).abs() / id.mc_se);
    }
    Ok(CheckResult::boolean(
        "feature-identity",
        worst <= 3.0,
        format!("max |z| = {worst:.2} over 20 instances (limit 3)"),
    ))
}

fn check_mp_edge() -> Result<CheckResult> {
    let (n, p, trials) = (301usize, 150usize, 20u64);
    let tops: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from(derive(VERIFY_SEED, &[40, t]));
            let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
            let c = crate::spectral::correlation_matrix(&x.view()).unwrap();
            crate::spectral::extreme_eigenvalues(&c.view()).unwrap().0
        })
        .collect();
    let (mean, _) = mean_and_se(&tops);
    let edge = crate::spectral::mp_edges(n, p).0;
    Ok(CheckResult::within(
        "mp-edge",
        mean / edge,
        1.0,
        0.05,
        format!("empirical mean {mean:.4} vs edge {edge:.4} at (n={n}, p={p})"),
    ))
}

fn check_krr_paths() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for s in 0..10u64 {
        let mut rng = rng_from(derive(VERIFY_SEED, &[50, s]));
        let f = Array2::from_shape_fn((20, 30), |_| StandardNormal.sample(&mut rng));
        let sys = KernelSystem::new(
            kernel_matrix(&f.view()),
            sample_beta_star(20, derive(VERIFY_SEED, &[51, s]))?,
            0.25,
        )?;
        for gamma in [0.5, 0.9] {
            let a = crate::kernel_rf::krr_insample_risk(&sys, gamma)?;
            let b = crate::kernel_rf::krr_insample_risk_direct(&sys, gamma)?;
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    Ok(CheckResult::within(
        "krr-paths",
        worst,
        0.0,
        1e-10,
        format!("max relative gap {worst:.3e} between eigen and direct paths"),
    ))
}

fn check_modelwise_mc() -> Result<CheckResult> {
    let (n, p, k, s2, th2) = (50usize, 20usize, 10usize, 0.25f64, 1.0f64);
    let trials = 4000u64;
    let rows: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = derive(VERIFY_SEED, &[60, t]);
            let theta = sample_beta_star(p, derive(s, &[tags::BETA])).unwrap();
            let ds = generate_dataset(n, p, &theta, s2, derive(s, &[tags::DATASET])).unwrap();
            let proj =
                crate::datagen::sample_projection(k, p, derive(s, &[tags::PROJECTION])).unwrap();
            let xt = ds.x.dot(&proj.q.t());
            let eig = crate::linalg::sym_eigen(&xt.t().dot(&xt).view()).unwrap();
            let xs = xt.dot(&eig.vectors);
            let q: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();
            let (alpha, _) = modelwise_optimal_alpha(&q, k, p, s2, th2).unwrap();
            let rhs = xs.t().dot(&ds.y);
            let bh = ndarray::Array1::from_shape_fn(k, |i| rhs[i] / (q[i] + q[i] * alpha[i]));
            let back = proj.q.t().dot(&eig.vectors.dot(&bh));
            let diff = &back - &theta;
            let formula = modelwise_risk_given_spectrum(&q, &q, &alpha, k, p, s2, th2).unwrap();
            (diff.dot(&diff), formula - s2)
        })
        .collect();
    let ex: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let th: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (me, se) = mean_and_se(&ex);
    let (mt, _) = mean_and_se(&th);
    let z = (me - mt).abs() / se;
    Ok(CheckResult::boolean(
        "modelwise-mc",
        z <= 3.0,
        format!("mc excess {me:.5} vs conditional formula {mt:.5}, z = {z:.2} (limit 3)"),
    ))
}

fn check_asymptotic_derivative() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for &(c, lam) in &[(0.5, 0.125), (1.0, 1.0), (2.0, 0.3), (5.0, 1.25)] {
        let h = 1e-6;
        let fd = (mp_stieltjes(c, lam - h)? - mp_stieltjes(c, lam + h)?) / (2.0 * h);
        let analytic = mp_stieltjes_deriv(c, lam)?;
        worst = worst.max((analytic - fd).abs() / analytic.abs().max(1.0));
    }
    // Cross-consistency: risk at the optimal penalty equals the optimal risk.
    let (c, s2, b2) = (0.5, 0.25, 1.0);
    let gap = (asymptotic_risk(c, c * s2 / b2, s2, b2)? - asymptotic_optimal(c, s2, b2)?.1).abs();
    Ok(CheckResult::boolean(
        "asymptotic-derivative",
        worst <= 1e-6 && gap <= 1e-10,
        format!("max fd gap {worst:.2e} (limit 1e-6), optimality gap {gap:.2e} (limit 1e-10)"),
    ))
}

fn check_taylor_monotone() -> Result<CheckResult> {
    let p = 100usize;
    let alpha = 0.5 / (1.0 + (p as f64 / 3.0).sqrt()).powi(2);
    let mut prev = f64::INFINITY;
    let mut ok = true;
    for n in 3..=500usize {
        let v = taylor_risk(n, p, alpha, 1.0)?;
        if v > prev + 1e-12 {
            ok = false;
        }
        prev = v;
    }
    Ok(CheckResult::boolean(
        "taylor-monotone",
        ok,
        format!("nonincreasing over n in [3, 500] at p = {p}, alpha = {alpha:.5}"),
    ))
}

fn check_interlacing() -> Result<CheckResult> {
    let mut ok = true;
    for s in 0..200u64 {
        let beta = sample_beta_star(10, derive(VERIFY_SEED, &[70, s]))?;
        let ds = generate_dataset(31, 10, &beta, 0.0, derive(VERIFY_SEED, &[71, s]))?;
        let small = ds.x.slice(ndarray::s![..30, ..]);
        let rep = crate::spectral::interlacing_check(&small, &ds.x.view())?;
        ok &= rep.holds;
    }
    Ok(CheckResult::boolean(
        "interlacing",
        ok,
        "200 random row appends".into(),
    ))
}

type CheckFn = fn() -> Result<CheckResult>;

pub const CHECK_NAMES: [&str; 10] = [
    "spectral-risk",
    "ridge-equivalence",
    "objective-identity",
    "feature-identity",
    "mp-edge",
    "krr-paths",
    "modelwise-mc",
    "asymptotic-derivative",
    "taylor-monotone",
    "interlacing",
];

fn checks() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("spectral-risk", check_spectral_risk_mc as CheckFn),
        ("ridge-equivalence", check_ridge_equivalence),
        ("objective-identity", check_objective_identity),
        ("feature-identity", check_feature_identity),
        ("mp-edge", check_mp_edge),
        ("krr-paths", check_krr_paths),
        ("modelwise-mc", check_modelwise_mc),
        ("asymptotic-derivative", check_asymptotic_derivative),
        ("taylor-monotone", check_taylor_monotone),
        ("interlacing", check_interlacing),
    ]
}

/// Run the named check, or every check when `only` is `None`. Returns the
/// per-check results and whether all of them passed.
pub fn run_verify(only: Option<&str>) -> Result<(Vec<CheckResult>, bool)> {
    let selected: Vec<(&'static str, CheckFn)> = match only {
        Some(name) => {
            let all = checks();
            let found: Vec<_> = all.into_iter().filter(|(n, _)| *n == name).collect();
            if found.is_empty() {
                return Err(crate::error::Error::Input(format!(
                    "unknown check `{name}`; available: {}",
                    CHECK_NAMES.join(", ")
                )));
            }
            found
        }
        None => checks(),
    };
    let mut results = Vec::with_capacity(selected.len());
    let mut all_pass = true;
    for (_, f) in selected {
        let r = f()?;
        all_pass &= r.passed;
        results.push(r);
    }
    Ok((results, all_pass))
}
