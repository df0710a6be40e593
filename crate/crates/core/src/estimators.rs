//! Coefficient estimators: minimum-norm least squares, ridge, and the three
//! dropout variants (scalar, per-coordinate, spectral), plus the dropout
//! training objective in closed and Monte Carlo form and the exact test-risk
//! functional.
//!
//! Dropout with present rate `gamma` minimizes the expected masked loss
//! `E_R ||y - (R * X) beta||^2`, which collapses to the Tikhonov objective
//! `||y - X b||^2 + (1-gamma)/gamma * ||Gamma b||^2` in the rescaled
//! coordinates `b = gamma * beta`, with `Gamma = diag(X^T X)^{1/2}`. All
//! `fit_dropout_*` functions return the minimizer in the rescaled `b`
//! parameterization: that is the quantity whose risk the closed forms in
//! [`crate::risk_theory`] describe.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rayon::prelude::*;

use crate::datagen::RegressionDataset;
use crate::error::{Error, Result};
use crate::linalg::{
    apply_spectral_filter, mean_and_se, min_norm_solve, solve_sym_spectral, sym_eigen,
};
use crate::seed::{derive, rng_from, tags};

/// Tagged estimator choice, as consumed by the sweep harness.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorSpec {
    Ols,
    Ridge { lambda: f64 },
    DropoutScalar { gamma: f64 },
    DropoutDiagonal { gammas: Vec<f64> },
    DropoutSpectral { gamma: f64 },
}

impl EstimatorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            EstimatorSpec::Ols => Ok(()),
            EstimatorSpec::Ridge { lambda } => {
                if *lambda < 0.0 {
                    Err(Error::Domain(format!(
                        "ridge lambda must be nonnegative, got {lambda}"
                    )))
                } else {
                    Ok(())
                }
            }
            EstimatorSpec::DropoutScalar { gamma } | EstimatorSpec::DropoutSpectral { gamma } => {
                check_gamma(*gamma)
            }
            EstimatorSpec::DropoutDiagonal { gammas } => {
                gammas.iter().try_for_each(|&g| check_gamma(g))
            }
        }
    }

    /// Short, stable label used in CSV output.
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Ols => "ols".into(),
            EstimatorSpec::Ridge { lambda } => format!("ridge({lambda})"),
            EstimatorSpec::DropoutScalar { gamma } => format!("dropout_scalar({gamma})"),
            EstimatorSpec::DropoutDiagonal { .. } => "dropout_diagonal".into(),
            EstimatorSpec::DropoutSpectral { gamma } => format!("dropout_spectral({gamma})"),
        }
    }

    pub fn fit(&self, ds: &RegressionDataset) -> Result<CoefficientEstimate> {
        match self {
            EstimatorSpec::Ols => fit_ols(ds),
            EstimatorSpec::Ridge { lambda } => fit_ridge(ds, *lambda),
            EstimatorSpec::DropoutScalar { gamma } => fit_dropout_scalar(ds, *gamma),
            EstimatorSpec::DropoutDiagonal { gammas } => fit_dropout_diagonal(ds, gammas),
            EstimatorSpec::DropoutSpectral { gamma } => fit_dropout_spectral(ds, *gamma),
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "dropout present rate must lie in (0, 1], got {gamma}"
        )))
    }
}

/// Which coordinate system a fitted coefficient vector lives in.
#[derive(Debug, Clone)]
pub enum Basis {
    Standard,
    /// The estimate lives in the eigenbasis of `X^T X`: columns of the stored
    /// orthogonal matrix `P` are eigenvectors (descending eigenvalue,
    /// first-nonzero-positive sign), so `P^T X^T X P` is diagonal and the
    /// rotated ground truth is `P^T beta_star`.
    Rotated(Array2<f64>),
}

#[derive(Debug, Clone)]
pub struct CoefficientEstimate {
    pub beta_hat: Array1<f64>,
    pub basis: Basis,
}

fn gram(ds: &RegressionDataset) -> Array2<f64> {
    let xf = crate::linalg::to_faer(&ds.x.view());
    let g = xf.transpose() * &xf;
    crate::linalg::from_faer(g.as_ref())
}

fn xty(ds: &RegressionDataset) -> Array1<f64> {
    ds.x.t().dot(&ds.y)
}

/// Minimum-norm least squares via spectral pseudoinverse.
pub fn fit_ols(ds: &RegressionDataset) -> Result<CoefficientEstimate> {
    let beta_hat = min_norm_solve(&ds.x.view(), &ds.y.view())?;
    Ok(CoefficientEstimate {
        beta_hat,
        basis: Basis::Standard,
    })
}

/// Ridge estimator `(X^T X + lambda I)^{-1} X^T y`. With `lambda = 0` the
/// Gram matrix must be nonsingular; rank-deficient problems belong to
/// [`fit_ols`].
pub fn fit_ridge(ds: &RegressionDataset, lambda: f64) -> Result<CoefficientEstimate> {
    if lambda < 0.0 {
        return Err(Error::Domain(format!(
            "ridge lambda must be nonnegative, got {lambda}"
        )));
    }
    let g = gram(ds);
    let rhs = xty(ds);
    let eig = sym_eigen(&g.view())?;
    let lam_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = ds.p() as f64 * f64::EPSILON * lam_max;
    if lambda == 0.0 {
        let lam_min = eig.values.last().copied().unwrap_or(0.0);
        if lam_min <= cutoff {
            return Err(Error::Singular(
                "X^T X is singular at lambda = 0; use fit_ols for the minimum-norm solution"
                    .into(),
            ));
        }
    }
    let beta_hat = apply_spectral_filter(&eig, &rhs, |lam| 1.0 / (lam + lambda));
    Ok(CoefficientEstimate {
        beta_hat,
        basis: Basis::Standard,
    })
}

fn diag_gram(g: &Array2<f64>) -> Array1<f64> {
    Array1::from_shape_fn(g.nrows(), |i| g[[i, i]])
}

fn fit_generalized(ds: &RegressionDataset, penalty: &Array1<f64>) -> Result<Array1<f64>> {
    let mut m = gram(ds);
    for i in 0..ds.p() {
        m[[i, i]] += penalty[i];
    }
    solve_sym_spectral(&m.view(), &xty(ds), false)
}

/// Dropout with a single present rate: generalized ridge with penalty matrix
/// `(1-gamma)/gamma * diag(X^T X)`. Returns the rescaled-parameterization
/// minimizer (see module docs).
pub fn fit_dropout_scalar(ds: &RegressionDataset, gamma: f64) -> Result<CoefficientEstimate> {
    check_gamma(gamma)?;
    if gamma == 1.0 {
        // Zero penalty: require a nonsingular system, mirroring fit_ridge.
        return match fit_ridge(ds, 0.0) {
            Ok(est) => Ok(est),
            Err(Error::Singular(_)) => Err(Error::Singular(
                "gamma = 1 removes the penalty and X^T X is singular; use fit_ols".into(),
            )),
            Err(e) => Err(e),
        };
    }
    let alpha = (1.0 - gamma) / gamma;
    let g = gram(ds);
    let penalty = diag_gram(&g).mapv(|m| alpha * m);
    let beta_hat = fit_generalized(ds, &penalty)?;
    Ok(CoefficientEstimate {
        beta_hat,
        basis: Basis::Standard,
    })
}

/// Per-coordinate dropout rates: penalty `(1-gamma_i)/gamma_i * (X^T X)_{ii}`.
pub fn fit_dropout_diagonal(ds: &RegressionDataset, gammas: &[f64]) -> Result<CoefficientEstimate> {
    if gammas.len() != ds.p() {
        return Err(Error::InvalidDimension(format!(
            "got {} rates for p = {} coordinates",
            gammas.len(),
            ds.p()
        )));
    }
    gammas.iter().try_for_each(|&g| check_gamma(g))?;
    let g = gram(ds);
    let d = diag_gram(&g);
    let penalty = Array1::from_shape_fn(ds.p(), |i| (1.0 - gammas[i]) / gammas[i] * d[i]);
    if gammas.iter().all(|&gi| gi == 1.0) {
        // Zero penalty everywhere: same contract as the scalar gamma = 1 case.
        return fit_dropout_scalar(ds, 1.0);
    }
    let beta_hat = fit_generalized(ds, &penalty)?;
    Ok(CoefficientEstimate {
        beta_hat,
        basis: Basis::Standard,
    })
}

/// Spectral dropout estimator: rotate by the eigenbasis `P` of `X^T X` so the
/// Gram matrix is diagonal, where the dropout solution collapses to
/// `gamma * pinv(X*^T X*) X*^T y` with `X* = X P`. The estimate is returned
/// in the rotated basis together with `P`.
pub fn fit_dropout_spectral(ds: &RegressionDataset, gamma: f64) -> Result<CoefficientEstimate> {
    check_gamma(gamma)?;
    let g = gram(ds);
    let eig = sym_eigen(&g.view())?;
    let p = ds.p();
    let n = ds.n();
    let lam_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = n.max(p) as f64 * f64::EPSILON * lam_max;
    // X*^T y = P^T X^T y; X*^T X* = diag(eigenvalues).
    let rot_rhs = eig.vectors.t().dot(&xty(ds));
    let beta_hat = Array1::from_shape_fn(p, |i| {
        let lam = eig.values[i];
        if lam > cutoff {
            gamma * rot_rhs[i] / lam
        } else {
            0.0
        }
    });
    Ok(CoefficientEstimate {
        beta_hat,
        basis: Basis::Rotated(eig.vectors),
    })
}

/// Exact expected masked loss `E_R ||y - (R * X) beta||^2` =
/// `||y - gamma X beta||^2 + (1-gamma) gamma ||Gamma beta||^2`.
pub fn dropout_objective_closed(
    ds: &RegressionDataset,
    beta: &ArrayView1<f64>,
    gamma: f64,
) -> Result<f64> {
    check_gamma(gamma)?;
    if beta.len() != ds.p() {
        return Err(Error::InvalidDimension(format!(
            "beta has {} entries, expected p = {}",
            beta.len(),
            ds.p()
        )));
    }
    let resid = &ds.y - &ds.x.dot(beta).mapv(|v| gamma * v);
    let fit_term = resid.dot(&resid);
    let mut pen = 0.0;
    for j in 0..ds.p() {
        let col = ds.x.column(j);
        let colsq = col.dot(&col);
        pen += colsq * beta[j] * beta[j];
    }
    Ok(fit_term + (1.0 - gamma) * gamma * pen)
}

/// Monte Carlo estimate of the masked loss over `n_masks` i.i.d.
/// Bernoulli(gamma) masks. Masks are partitioned across workers with
/// per-mask seeds derived from `(seed, mask index)`, so the returned values
/// do not depend on the worker count.
pub fn dropout_objective_mc(
    ds: &RegressionDataset,
    beta: &ArrayView1<f64>,
    gamma: f64,
    n_masks: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    if beta.len() != ds.p() {
        return Err(Error::InvalidDimension(format!(
            "beta has {} entries, expected p = {}",
            beta.len(),
            ds.p()
        )));
    }
    if n_masks == 0 {
        return Err(Error::Domain("n_masks must be at least 1".into()));
    }
    let (n, p) = (ds.n(), ds.p());
    if gamma == 1.0 {
        // Bernoulli(1) masks are deterministic: evaluate once, zero spread.
        let resid = &ds.y - &ds.x.dot(beta);
        return Ok((resid.dot(&resid), 0.0));
    }
    let values: Vec<f64> = (0..n_masks)
        .into_par_iter()
        .map(|m| {
            let mut rng = rng_from(derive(seed, &[tags::MASK, m as u64]));
            let mut loss = 0.0;
            for i in 0..n {
                let mut pred = 0.0;
                for j in 0..p {
                    // Keep each entry with probability gamma.
                    if rng.random::<f64>() < gamma {
                        pred += ds.x[[i, j]] * beta[j];
                    }
                }
                let r = ds.y[i] - pred;
                loss += r * r;
            }
            loss
        })
        .collect();
    Ok(mean_and_se(&values))
}

/// Exact test risk of an estimate against the generating model:
/// `excess = ||beta_hat - truth||^2`, `total = excess + sigma2`, where the
/// truth is rotated into the estimate's basis first (the norm is
/// rotation-invariant, so both bases give identical risk).
pub fn test_risk(
    est: &CoefficientEstimate,
    beta_star: &ArrayView1<f64>,
    sigma2: f64,
) -> Result<(f64, f64)> {
    let diff = match &est.basis {
        Basis::Standard => {
            if est.beta_hat.len() != beta_star.len() {
                return Err(Error::InvalidDimension(format!(
                    "estimate has {} coordinates, truth has {}",
                    est.beta_hat.len(),
                    beta_star.len()
                )));
            }
            &est.beta_hat - beta_star
        }
        Basis::Rotated(p) => {
            if p.nrows() != beta_star.len() || est.beta_hat.len() != p.ncols() {
                return Err(Error::InvalidDimension(format!(
                    "rotation is {}x{}, estimate has {} coordinates, truth has {}",
                    p.nrows(),
                    p.ncols(),
                    est.beta_hat.len(),
                    beta_star.len()
                )));
            }
            &est.beta_hat - &p.t().dot(beta_star)
        }
    };
    let excess = diff.dot(&diff);
    Ok((excess, excess + sigma2))
}
