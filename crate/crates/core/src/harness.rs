//! Seeded Monte Carlo sweeps with theory overlays.
//!
//! Reproducibility contract: a sweep is a pure function of its config and
//! master seed. Per-trial seeds are derived as
//! `derive(master_seed, [sweep tag, grid index, trial index])` (see
//! [`crate::seed`]), trials are collected into an index-ordered buffer, and
//! aggregation uses pairwise summation over that buffer, so the output is
//! bit-identical for any worker count.

use faer::linalg::solvers::Solve as _;
use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::datagen::{generate_dataset, sample_beta_star, sample_feature_weights};
use crate::error::{Error, Result};
use crate::estimators::EstimatorSpec;
use crate::linalg::{mean_and_se, min_norm_solve_fast, solve_sym_spectral, sym_eigen, to_faer};
use crate::risk_theory::{
    modelwise_optimal_alpha, modelwise_optimal_risk_given_spectrum, modelwise_risk_given_spectrum,
    ridge_optimal_lambda, spectral_optimal, spectral_risk, Regime,
};
use crate::seed::{derive, rng_from, tags};
use crate::spectral::mp_edges;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Samples,
    Model,
    Features,
    Spectrum,
}

impl SweepKind {
    pub fn seed_tag(self) -> u64 {
        match self {
            SweepKind::Samples => tags::SWEEP_SAMPLES,
            SweepKind::Model => tags::SWEEP_MODEL,
            SweepKind::Features => tags::SWEEP_FEATURES,
            SweepKind::Spectrum => tags::SWEEP_SPECTRUM,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SweepKind::Samples => "samples",
            SweepKind::Model => "model",
            SweepKind::Features => "features",
            SweepKind::Spectrum => "spectrum",
        }
    }
}

/// How the dropout rate is chosen at each grid point.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaPolicy {
    Fixed(f64),
    /// Per-point risk-minimizing rate: the closed-form optimal present rate
    /// for scalar/spectral estimators (undefined inside the interpolation
    /// threshold band, where such grid points are skipped), the
    /// ridge-equivalent generalized rates for the diagonal estimator
    /// (defined everywhere), and the optimal per-mode couplings for the
    /// model-size sweep.
    OptimalPerPoint,
    /// One curve per rate; expanded by [`run_sweep`].
    Sweep(Vec<f64>),
}

/// Which axis a feature sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureAxis {
    Samples,
    Features,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Excess,
    Total,
    Both,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub sweep: SweepKind,
    /// Grid of n values (samples/features/spectrum) or k values (model).
    pub grid: Vec<usize>,
    /// Coefficient dimension p (samples, model, spectrum sweeps).
    pub p: usize,
    /// Fixed sample count, where the grid does not supply it.
    pub n: Option<usize>,
    /// Raw input dimension d (feature sweeps).
    pub input_dim: Option<usize>,
    /// Feature count D (feature sweeps along the sample axis).
    pub feature_count: Option<usize>,
    pub feature_axis: FeatureAxis,
    /// Held-out points per trial for feature sweeps.
    pub test_size: usize,
    pub sigma2: f64,
    /// Squared norm of the planted coefficients.
    pub b2: f64,
    pub estimator: EstimatorSpec,
    pub gamma_policy: GammaPolicy,
    pub trials: usize,
    pub master_seed: u64,
    pub report: ReportKind,
    /// Worker threads; `None` uses the rayon default. Results are identical
    /// for every value.
    pub threads: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            sweep: SweepKind::Samples,
            grid: Vec::new(),
            p: 0,
            n: None,
            input_dim: None,
            feature_count: None,
            feature_axis: FeatureAxis::Samples,
            test_size: 1000,
            sigma2: 0.0,
            b2: 1.0,
            estimator: EstimatorSpec::Ols,
            gamma_policy: GammaPolicy::OptimalPerPoint,
            trials: 1000,
            master_seed: 0,
            report: ReportKind::Both,
            threads: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |path: &str, reason: String| Error::Config {
            path: path.into(),
            reason,
        };
        if self.grid.is_empty() {
            return Err(cfg_err("grid", "must be nonempty".into()));
        }
        if !self.grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(cfg_err("grid", "must be strictly increasing".into()));
        }
        if self.grid[0] == 0 {
            return Err(cfg_err("grid", "entries must be positive".into()));
        }
        if self.trials == 0 {
            return Err(cfg_err("trials", "must be at least 1".into()));
        }
        if self.sigma2 < 0.0 {
            return Err(cfg_err("sigma2", "must be nonnegative".into()));
        }
        if self.b2 <= 0.0 {
            return Err(cfg_err("b2", "must be positive".into()));
        }
        self.estimator.validate()?;
        if let GammaPolicy::Fixed(g) = self.gamma_policy {
            if !(g > 0.0 && g <= 1.0) {
                return Err(cfg_err("gamma_policy", format!("rate {g} outside (0, 1]")));
            }
        }
        if let GammaPolicy::Sweep(ref list) = self.gamma_policy {
            if list.is_empty() {
                return Err(cfg_err("gamma_policy", "sweep list must be nonempty".into()));
            }
            for &g in list {
                if !(g > 0.0 && g <= 1.0) {
                    return Err(cfg_err("gamma_policy", format!("rate {g} outside (0, 1]")));
                }
            }
        }
        match self.sweep {
            SweepKind::Samples | SweepKind::Spectrum => {
                if self.p == 0 {
                    return Err(cfg_err("p", "must be positive".into()));
                }
            }
            SweepKind::Model => {
                if self.p == 0 {
                    return Err(cfg_err("p", "must be positive".into()));
                }
                if self.n.is_none() {
                    return Err(cfg_err("n", "model sweeps need a fixed sample count".into()));
                }
                if let Some(&kmax) = self.grid.last() {
                    if kmax > self.p {
                        return Err(cfg_err(
                            "grid",
                            format!("model sizes must satisfy k <= p, got k = {kmax} > p = {}", self.p),
                        ));
                    }
                }
            }
            SweepKind::Features => {
                if self.input_dim.is_none() {
                    return Err(cfg_err("d", "feature sweeps need the input dimension".into()));
                }
                match self.feature_axis {
                    FeatureAxis::Samples => {
                        if self.feature_count.is_none() {
                            return Err(cfg_err(
                                "feature_count",
                                "sample-axis feature sweeps need a fixed feature count".into(),
                            ));
                        }
                    }
                    FeatureAxis::Features => {
                        if self.n.is_none() {
                            return Err(cfg_err(
                                "n",
                                "feature-axis sweeps need a fixed sample count".into(),
                            ));
                        }
                    }
                }
                if self.test_size == 0 {
                    return Err(cfg_err("test_size", "must be positive".into()));
                }
            }
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads.unwrap_or(0))
            .build()
            .map_err(|e| Error::Config {
                path: "threads".into(),
                reason: e.to_string(),
            })
    }
}

/// One aggregated grid point of a risk curve.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub axis: usize,
    pub n: usize,
    pub p: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub emp_excess_mean: f64,
    pub emp_excess_se: f64,
    pub emp_total_mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theory_excess: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theory_total: Option<f64>,
}

/// An aggregated sweep: one point per retained grid value, in grid order.
/// `emp_total_mean - emp_excess_mean = sigma2` holds exactly per point.
#[derive(Debug, Clone, Serialize)]
pub struct RiskCurve {
    pub sweep: &'static str,
    pub estimator: String,
    pub sigma2: f64,
    pub trials: usize,
    /// Which risk columns the caller asked the writers to emit.
    pub report: ReportKind,
    pub points: Vec<CurvePoint>,
}

/// One row of the largest-eigenvalue trace.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRow {
    pub n: usize,
    pub p: usize,
    pub empirical_largest_mean: f64,
    pub empirical_largest_se: f64,
    pub mp_prediction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumTrace {
    pub trials: usize,
    pub rows: Vec<SpectrumRow>,
}

/// Monotonicity audit of a risk curve's empirical excess means.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonotonicityReport {
    /// True iff no adjacent rise exceeds twice the pooled standard error of
    /// the pair difference.
    pub is_monotone: bool,
    /// Largest adjacent rise `mean[i+1] - mean[i]` (negative when the curve
    /// strictly decreases).
    pub max_violation: f64,
    /// Tolerance at the worst pair: `2 * sqrt(se_i^2 + se_{i+1}^2)`.
    pub tolerance: f64,
    /// Interior grid value exceeding both endpoints by more than twice the
    /// pooled SE, if any (the double-descent peak).
    pub peak_axis: Option<usize>,
    pub peak_excess_over_endpoints: f64,
}

enum PointGamma {
    /// Estimator takes no rate (OLS / Ridge).
    NotApplicable,
    Fixed(f64),
    /// Diagonal estimator at the ridge-equivalent generalized rates.
    GeneralizedRates,
    /// The closed-form optimal rate is undefined here (threshold band).
    Undefined,
}

fn resolve_point_gamma(cfg: &SweepConfig, n: usize, p: usize) -> Result<PointGamma> {
    match (&cfg.estimator, &cfg.gamma_policy) {
        (EstimatorSpec::Ols, _) | (EstimatorSpec::Ridge { .. }, _) => {
            Ok(PointGamma::NotApplicable)
        }
        (_, GammaPolicy::Fixed(g)) => Ok(PointGamma::Fixed(*g)),
        (EstimatorSpec::DropoutDiagonal { .. }, GammaPolicy::OptimalPerPoint) => {
            Ok(PointGamma::GeneralizedRates)
        }
        (_, GammaPolicy::OptimalPerPoint) => match spectral_optimal(n, p, cfg.sigma2, cfg.b2) {
            Ok((g, _)) => Ok(PointGamma::Fixed(g)),
            Err(Error::ThresholdRegime(_)) => Ok(PointGamma::Undefined),
            Err(e) => Err(e),
        },
        (_, GammaPolicy::Sweep(_)) => Err(Error::Config {
            path: "gamma_policy".into(),
            reason: "sweep lists must be expanded through run_sweep".into(),
        }),
    }
}

/// Fit the configured estimator and return the excess risk
/// `||beta_hat - beta_star||^2`, using rotation-invariant fast paths:
/// the spectral estimator's risk equals that of `gamma * (min-norm OLS)`
/// in the standard basis, so no per-trial diagonalization is needed.
fn trial_excess(
    estimator: &EstimatorSpec,
    gamma: &PointGamma,
    ds: &crate::datagen::RegressionDataset,
    b2: f64,
) -> Result<f64> {
    let p = ds.p();
    let excess_of = |beta_hat: &Array1<f64>| {
        let diff = beta_hat - &ds.beta_star;
        diff.dot(&diff)
    };
    match estimator {
        EstimatorSpec::Ols => {
            let bh = min_norm_solve_fast(&ds.x.view(), &ds.y.view())?;
            Ok(excess_of(&bh))
        }
        EstimatorSpec::Ridge { lambda } => {
            let bh = solve_penalized_fast(ds, &Penalty::Scalar(*lambda))?;
            Ok(excess_of(&bh))
        }
        EstimatorSpec::DropoutSpectral { .. } => {
            let g = match gamma {
                PointGamma::Fixed(g) => *g,
                _ => unreachable!("resolve_point_gamma fixes spectral rates"),
            };
            let bh = min_norm_solve_fast(&ds.x.view(), &ds.y.view())?;
            Ok(excess_of(&bh.mapv(|v| g * v)))
        }
        EstimatorSpec::DropoutScalar { .. } => {
            let g = match gamma {
                PointGamma::Fixed(g) => *g,
                _ => unreachable!("resolve_point_gamma fixes scalar rates"),
            };
            if g == 1.0 {
                let bh = min_norm_solve_fast(&ds.x.view(), &ds.y.view())?;
                return Ok(excess_of(&bh));
            }
            let alpha = (1.0 - g) / g;
            let bh = solve_penalized_fast(ds, &Penalty::DiagScale(alpha))?;
            Ok(excess_of(&bh))
        }
        EstimatorSpec::DropoutDiagonal { gammas } => {
            let bh = match gamma {
                PointGamma::GeneralizedRates => {
                    // gamma_i = b2 m_i / (p sigma2 + b2 m_i) makes the
                    // penalty exactly (p sigma2 / b2) I.
                    let lam = ridge_optimal_lambda(p, ds.sigma2, b2)?;
                    solve_penalized_fast(ds, &Penalty::Scalar(lam))?
                }
                PointGamma::Fixed(g) => {
                    let alpha = (1.0 - g) / g;
                    solve_penalized_fast(ds, &Penalty::DiagScale(alpha))?
                }
                _ => {
                    if gammas.len() != p {
                        return Err(Error::InvalidDimension(format!(
                            "estimator carries {} rates for p = {p}",
                            gammas.len()
                        )));
                    }
                    let gram = gram_of(ds);
                    let pen = Array1::from_shape_fn(p, |i| {
                        (1.0 - gammas[i]) / gammas[i] * gram[[i, i]]
                    });
                    solve_gram_penalized(&gram, ds, &pen)?
                }
            };
            Ok(excess_of(&bh))
        }
    }
}

enum Penalty {
    Scalar(f64),
    /// `alpha * diag(X^T X)`.
    DiagScale(f64),
}

fn gram_of(ds: &crate::datagen::RegressionDataset) -> Array2<f64> {
    let xf = to_faer(&ds.x.view());
    let g = xf.transpose() * &xf;
    crate::linalg::from_faer(g.as_ref())
}

fn solve_penalized_fast(
    ds: &crate::datagen::RegressionDataset,
    penalty: &Penalty,
) -> Result<Array1<f64>> {
    let p = ds.p();
    let gram = gram_of(ds);
    let pen = match penalty {
        Penalty::Scalar(lam) => Array1::from_elem(p, *lam),
        Penalty::DiagScale(alpha) => Array1::from_shape_fn(p, |i| alpha * gram[[i, i]]),
    };
    solve_gram_penalized(&gram, ds, &pen)
}

fn solve_gram_penalized(
    gram: &Array2<f64>,
    ds: &crate::datagen::RegressionDataset,
    pen: &Array1<f64>,
) -> Result<Array1<f64>> {
    let p = ds.p();
    let rhs = ds.x.t().dot(&ds.y);
    let mut m = to_faer(&gram.view());
    for i in 0..p {
        m[(i, i)] += pen[i];
    }
    if let Ok(llt) = m.llt(faer::Side::Lower) {
        let sol = llt.solve(&crate::linalg::to_faer_col(&rhs.view()));
        return Ok(crate::linalg::col_to_array(sol.as_ref()));
    }
    let shifted = crate::linalg::from_faer(m.as_ref());
    solve_sym_spectral(&shifted.view(), &rhs, false)
}

fn aggregate_point(
    cfg: &SweepConfig,
    axis: usize,
    n: usize,
    p: usize,
    k: Option<usize>,
    gamma: Option<f64>,
    excesses: &[f64],
    theory_excess: Option<f64>,
) -> CurvePoint {
    let (mean, se) = mean_and_se(excesses);
    CurvePoint {
        axis,
        n,
        p,
        k,
        gamma,
        emp_excess_mean: mean,
        emp_excess_se: se,
        emp_total_mean: mean + cfg.sigma2,
        theory_excess,
        theory_total: theory_excess.map(|e| e + cfg.sigma2),
    }
}

/// Sample-size sweep: fresh dataset per (grid point, trial), estimator from
/// config, excess risk aggregated per point. Grid points where an
/// optimal-per-point rate is undefined (the threshold band of the spectral
/// rate) are omitted from the curve.
pub fn run_sample_sweep(cfg: &SweepConfig) -> Result<RiskCurve> {
    if cfg.sweep != SweepKind::Samples {
        return Err(Error::Config {
            path: "sweep".into(),
            reason: format!("run_sample_sweep invoked on `{}`", cfg.sweep.label()),
        });
    }
    cfg.validate()?;
    let pool = cfg.pool()?;
    let p = cfg.p;
    let mut points = Vec::with_capacity(cfg.grid.len());
    for (gi, &n) in cfg.grid.iter().enumerate() {
        let point_gamma = resolve_point_gamma(cfg, n, p)?;
        if matches!(point_gamma, PointGamma::Undefined) {
            continue;
        }
        let excesses: Result<Vec<f64>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let ts = derive(cfg.master_seed, &[cfg.sweep.seed_tag(), gi as u64, t as u64]);
                    let beta = sample_beta_star(p, derive(ts, &[tags::BETA]))?
                        .mapv(|v| v * cfg.b2.sqrt());
                    let ds = generate_dataset(n, p, &beta, cfg.sigma2, derive(ts, &[tags::DATASET]))?;
                    trial_excess(&cfg.estimator, &point_gamma, &ds, cfg.b2)
                })
                .collect()
        });
        let excesses = excesses?;
        let gamma_label = match point_gamma {
            PointGamma::Fixed(g) => Some(g),
            _ => None,
        };
        let theory = match (&cfg.estimator, &point_gamma) {
            (EstimatorSpec::DropoutSpectral { .. }, PointGamma::Fixed(g)) => {
                let rr = spectral_risk(n, p, *g, cfg.sigma2, cfg.b2)?;
                if rr.regime == Regime::Threshold {
                    None
                } else {
                    rr.excess
                }
            }
            _ => None,
        };
        points.push(aggregate_point(
            cfg,
            n,
            n,
            p,
            None,
            gamma_label,
            &excesses,
            theory,
        ));
    }
    Ok(RiskCurve {
        sweep: cfg.sweep.label(),
        estimator: cfg.estimator.label(),
        sigma2: cfg.sigma2,
        trials: cfg.trials,
        report: cfg.report,
        points,
    })
}

/// Model-size sweep: per trial project the design onto a Haar k-frame,
/// rotate to diagonalize, fit the per-mode dropout estimator (optimal
/// couplings or a fixed rate), and measure the excess against the full
/// p-dimensional truth. The conditional closed form, averaged over trials,
/// is attached as the theory overlay.
pub fn run_model_sweep(cfg: &SweepConfig) -> Result<RiskCurve> {
    if cfg.sweep != SweepKind::Model {
        return Err(Error::Config {
            path: "sweep".into(),
            reason: format!("run_model_sweep invoked on `{}`", cfg.sweep.label()),
        });
    }
    cfg.validate()?;
    let pool = cfg.pool()?;
    let p = cfg.p;
    let n = cfg.n.expect("validated");
    let optimal = match &cfg.gamma_policy {
        GammaPolicy::OptimalPerPoint => true,
        GammaPolicy::Fixed(_) => false,
        GammaPolicy::Sweep(_) => {
            return Err(Error::Config {
                path: "gamma_policy".into(),
                reason: "sweep lists must be expanded through run_sweep".into(),
            })
        }
    };
    let fixed_gamma = match &cfg.gamma_policy {
        GammaPolicy::Fixed(g) => Some(*g),
        _ => None,
    };

    let mut points = Vec::with_capacity(cfg.grid.len());
    for (gi, &k) in cfg.grid.iter().enumerate() {
        let rows: Result<Vec<(f64, f64)>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let ts = derive(cfg.master_seed, &[cfg.sweep.seed_tag(), gi as u64, t as u64]);
                    let theta = sample_beta_star(p, derive(ts, &[tags::BETA]))?
                        .mapv(|v| v * cfg.b2.sqrt());
                    let ds =
                        generate_dataset(n, p, &theta, cfg.sigma2, derive(ts, &[tags::DATASET]))?;
                    let proj =
                        crate::datagen::sample_projection(k, p, derive(ts, &[tags::PROJECTION]))?;
                    // Projected design, rotated so its Gram matrix is diagonal.
                    let xt = ds.x.dot(&proj.q.t());
                    let eig = sym_eigen(&xt.t().dot(&xt).view())?;
                    let xs = xt.dot(&eig.vectors);
                    let q: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();
                    let (alpha, _) = if optimal {
                        modelwise_optimal_alpha(&q, k, p, cfg.sigma2, cfg.b2)?
                    } else {
                        let g = fixed_gamma.expect("validated");
                        (vec![(1.0 - g) / g; k], 0.0)
                    };
                    let rhs = xs.t().dot(&ds.y);
                    let top = q.first().copied().unwrap_or(0.0);
                    let cutoff = n.max(k) as f64 * f64::EPSILON * top;
                    let bh = Array1::from_shape_fn(k, |i| {
                        let denom = q[i] + q[i] * alpha[i];
                        if denom > cutoff {
                            rhs[i] / denom
                        } else {
                            0.0
                        }
                    });
                    let back = proj.q.t().dot(&eig.vectors.dot(&bh));
                    let diff = &back - &theta;
                    let excess = diff.dot(&diff);
                    let theory_total = if optimal {
                        modelwise_optimal_risk_given_spectrum(&q, k, p, cfg.sigma2, cfg.b2)?
                    } else {
                        modelwise_risk_given_spectrum(&q, &q, &alpha, k, p, cfg.sigma2, cfg.b2)?
                    };
                    Ok((excess, theory_total - cfg.sigma2))
                })
                .collect()
        });
        let rows = rows?;
        let excesses: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let theories: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let (theory_mean, _) = mean_and_se(&theories);
        points.push(aggregate_point(
            cfg,
            k,
            n,
            p,
            Some(k),
            fixed_gamma,
            &excesses,
            Some(theory_mean),
        ));
    }
    Ok(RiskCurve {
        sweep: cfg.sweep.label(),
        estimator: if optimal {
            "dropout_diagonal(optimal)".into()
        } else {
            cfg.estimator.label()
        },
        sigma2: cfg.sigma2,
        trials: cfg.trials,
        report: cfg.report,
        points,
    })
}

/// Random-feature sweep: embed Gaussian inputs through a fresh random ReLU
/// layer, plant a linear truth on the features, fit the configured estimator
/// on the embedded design, and report held-out mean squared error on a fresh
/// test set.
pub fn run_feature_sweep(cfg: &SweepConfig) -> Result<RiskCurve> {
    if cfg.sweep != SweepKind::Features {
        return Err(Error::Config {
            path: "sweep".into(),
            reason: format!("run_feature_sweep invoked on `{}`", cfg.sweep.label()),
        });
    }
    cfg.validate()?;
    let pool = cfg.pool()?;
    let d = cfg.input_dim.expect("validated");

    let mut points = Vec::with_capacity(cfg.grid.len());
    for (gi, &axis_val) in cfg.grid.iter().enumerate() {
        let (n, d_feat) = match cfg.feature_axis {
            FeatureAxis::Samples => (axis_val, cfg.feature_count.expect("validated")),
            FeatureAxis::Features => (cfg.n.expect("validated"), axis_val),
        };
        let point_gamma = resolve_point_gamma(cfg, n, d_feat)?;
        if matches!(point_gamma, PointGamma::Undefined) {
            continue;
        }
        let totals: Result<Vec<f64>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let ts = derive(cfg.master_seed, &[cfg.sweep.seed_tag(), gi as u64, t as u64]);
                    let w = sample_feature_weights(
                        d_feat,
                        d,
                        derive(ts, &[tags::FEATURE_WEIGHTS]),
                    )?;
                    let beta_feat = sample_beta_star(d_feat, derive(ts, &[tags::BETA]))?
                        .mapv(|v| v * cfg.b2.sqrt());

                    let mut rng = rng_from(derive(ts, &[tags::DATASET]));
                    let z = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
                    let a = crate::kernel_rf::relu_embed(&z.view(), &w)?;
                    let sd = cfg.sigma2.sqrt();
                    let mut y = a.dot(&beta_feat);
                    for yi in y.iter_mut() {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        *yi += sd * e;
                    }
                    let ds = crate::datagen::RegressionDataset::new(
                        a,
                        y,
                        beta_feat.clone(),
                        cfg.sigma2,
                    )?;

                    let mut rng_t = rng_from(derive(ts, &[tags::TEST_SET]));
                    let zt = Array2::from_shape_fn((cfg.test_size, d), |_| {
                        StandardNormal.sample(&mut rng_t)
                    });
                    let at = crate::kernel_rf::relu_embed(&zt.view(), &w)?;
                    let mut yt = at.dot(&beta_feat);
                    for yi in yt.iter_mut() {
                        let e: f64 = StandardNormal.sample(&mut rng_t);
                        *yi += sd * e;
                    }

                    let beta_hat = fitted_coefficients(&cfg.estimator, &point_gamma, &ds, cfg.b2)?;
                    let pred = at.dot(&beta_hat);
                    let mut mse = 0.0;
                    for i in 0..cfg.test_size {
                        let r = pred[i] - yt[i];
                        mse += r * r;
                    }
                    Ok(mse / cfg.test_size as f64)
                })
                .collect()
        });
        let totals = totals?;
        let (total_mean, total_se) = mean_and_se(&totals);
        let gamma_label = match point_gamma {
            PointGamma::Fixed(g) => Some(g),
            _ => None,
        };
        points.push(CurvePoint {
            axis: axis_val,
            n,
            p: d_feat,
            k: None,
            gamma: gamma_label,
            emp_excess_mean: total_mean - cfg.sigma2,
            emp_excess_se: total_se,
            emp_total_mean: total_mean,
            theory_excess: None,
            theory_total: None,
        });
    }
    Ok(RiskCurve {
        sweep: cfg.sweep.label(),
        estimator: cfg.estimator.label(),
        sigma2: cfg.sigma2,
        trials: cfg.trials,
        report: cfg.report,
        points,
    })
}

/// Standard-basis coefficients of the configured estimator, via the same
/// fast paths as [`trial_excess`] (the spectral estimator's predictions
/// coincide with `gamma * min-norm OLS`).
fn fitted_coefficients(
    estimator: &EstimatorSpec,
    gamma: &PointGamma,
    ds: &crate::datagen::RegressionDataset,
    b2: f64,
) -> Result<Array1<f64>> {
    match estimator {
        EstimatorSpec::Ols => min_norm_solve_fast(&ds.x.view(), &ds.y.view()),
        EstimatorSpec::Ridge { lambda } => solve_penalized_fast(ds, &Penalty::Scalar(*lambda)),
        EstimatorSpec::DropoutSpectral { .. } => {
            let g = match gamma {
                PointGamma::Fixed(g) => *g,
                _ => unreachable!(),
            };
            Ok(min_norm_solve_fast(&ds.x.view(), &ds.y.view())?.mapv(|v| g * v))
        }
        EstimatorSpec::DropoutScalar { .. } => {
            let g = match gamma {
                PointGamma::Fixed(g) => *g,
                _ => unreachable!(),
            };
            if g == 1.0 {
                min_norm_solve_fast(&ds.x.view(), &ds.y.view())
            } else {
                solve_penalized_fast(ds, &Penalty::DiagScale((1.0 - g) / g))
            }
        }
        EstimatorSpec::DropoutDiagonal { gammas } => match gamma {
            PointGamma::GeneralizedRates => {
                let lam = ridge_optimal_lambda(ds.p(), ds.sigma2, b2)?;
                solve_penalized_fast(ds, &Penalty::Scalar(lam))
            }
            PointGamma::Fixed(g) => solve_penalized_fast(ds, &Penalty::DiagScale((1.0 - g) / g)),
            _ => {
                let gram = gram_of(ds);
                let pen = Array1::from_shape_fn(ds.p(), |i| {
                    (1.0 - gammas[i]) / gammas[i] * gram[[i, i]]
                });
                solve_gram_penalized(&gram, ds, &pen)
            }
        },
    }
}

/// Largest-eigenvalue trace of the sample correlation matrix, paired with
/// the Marchenko-Pastur upper-edge prediction at each grid point.
pub fn run_spectrum_trace(cfg: &SweepConfig) -> Result<SpectrumTrace> {
    if cfg.sweep != SweepKind::Spectrum {
        return Err(Error::Config {
            path: "sweep".into(),
            reason: format!("run_spectrum_trace invoked on `{}`", cfg.sweep.label()),
        });
    }
    cfg.validate()?;
    let pool = cfg.pool()?;
    let p = cfg.p;
    let mut rows = Vec::with_capacity(cfg.grid.len());
    for (gi, &n) in cfg.grid.iter().enumerate() {
        let tops: Result<Vec<f64>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let ts = derive(cfg.master_seed, &[cfg.sweep.seed_tag(), gi as u64, t as u64]);
                    let mut rng = rng_from(derive(ts, &[tags::DATASET]));
                    let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
                    let c = crate::spectral::correlation_matrix(&x.view())?;
                    let (top, _) = crate::spectral::extreme_eigenvalues(&c.view())?;
                    Ok(top)
                })
                .collect()
        });
        let tops = tops?;
        let (mean, se) = mean_and_se(&tops);
        rows.push(SpectrumRow {
            n,
            p,
            empirical_largest_mean: mean,
            empirical_largest_se: se,
            mp_prediction: mp_edges(n, p).0,
        });
    }
    Ok(SpectrumTrace {
        trials: cfg.trials,
        rows,
    })
}

/// Audit a curve's excess means for monotone decrease at `2 x pooled SE`
/// tolerance per adjacent pair, and flag an interior double-descent peak.
pub fn monotonicity_report(curve: &RiskCurve) -> Result<MonotonicityReport> {
    let pts = &curve.points;
    if pts.len() < 3 {
        return Err(Error::Input(format!(
            "monotonicity report needs at least 3 points, got {}",
            pts.len()
        )));
    }
    let mut is_monotone = true;
    let mut max_violation = f64::NEG_INFINITY;
    let mut tol_at_max = 0.0;
    for w in pts.windows(2) {
        let rise = w[1].emp_excess_mean - w[0].emp_excess_mean;
        let tol = 2.0 * (w[0].emp_excess_se.powi(2) + w[1].emp_excess_se.powi(2)).sqrt();
        if rise > tol {
            is_monotone = false;
        }
        if rise > max_violation {
            max_violation = rise;
            tol_at_max = tol;
        }
    }

    let first = &pts[0];
    let last = &pts[pts.len() - 1];
    let mut peak_axis = None;
    let mut peak_excess = f64::NEG_INFINITY;
    for pt in &pts[1..pts.len() - 1] {
        let over_first = pt.emp_excess_mean
            - first.emp_excess_mean
            - 2.0 * (pt.emp_excess_se.powi(2) + first.emp_excess_se.powi(2)).sqrt();
        let over_last = pt.emp_excess_mean
            - last.emp_excess_mean
            - 2.0 * (pt.emp_excess_se.powi(2) + last.emp_excess_se.powi(2)).sqrt();
        if over_first > 0.0 && over_last > 0.0 {
            let excess = pt.emp_excess_mean - first.emp_excess_mean.max(last.emp_excess_mean);
            if excess > peak_excess {
                peak_excess = excess;
                peak_axis = Some(pt.axis);
            }
        }
    }
    Ok(MonotonicityReport {
        is_monotone,
        max_violation,
        tolerance: tol_at_max,
        peak_axis,
        peak_excess_over_endpoints: if peak_axis.is_some() {
            peak_excess
        } else {
            0.0
        },
    })
}

/// A dispatched sweep result: one curve, one curve per swept rate, or a
/// spectrum trace.
#[derive(Debug, Clone)]
pub enum SweepOutput {
    Curve(RiskCurve),
    Curves(Vec<(f64, RiskCurve)>),
    Spectrum(SpectrumTrace),
}

/// Run whatever the config describes, expanding `GammaPolicy::Sweep` into
/// one curve per rate.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    if let GammaPolicy::Sweep(list) = &cfg.gamma_policy {
        if cfg.sweep == SweepKind::Spectrum {
            return Err(Error::Config {
                path: "gamma_policy".into(),
                reason: "spectrum traces take no dropout rate".into(),
            });
        }
        let mut curves = Vec::with_capacity(list.len());
        for &g in list {
            let mut sub = cfg.clone();
            sub.gamma_policy = GammaPolicy::Fixed(g);
            let curve = match cfg.sweep {
                SweepKind::Samples => run_sample_sweep(&sub)?,
                SweepKind::Model => run_model_sweep(&sub)?,
                SweepKind::Features => run_feature_sweep(&sub)?,
                SweepKind::Spectrum => unreachable!(),
            };
            curves.push((g, curve));
        }
        return Ok(SweepOutput::Curves(curves));
    }
    Ok(match cfg.sweep {
        SweepKind::Samples => SweepOutput::Curve(run_sample_sweep(cfg)?),
        SweepKind::Model => SweepOutput::Curve(run_model_sweep(cfg)?),
        SweepKind::Features => SweepOutput::Curve(run_feature_sweep(cfg)?),
        SweepKind::Spectrum => SweepOutput::Spectrum(run_spectrum_trace(cfg)?),
    })
}
