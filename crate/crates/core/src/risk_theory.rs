//! Closed-form expected risks, optimal dropout rates, and asymptotics.
//!
//! Conventions shared by every function here:
//! - `b2` is the squared norm of the ground-truth coefficients
//!   (`||beta^0||^2`, or `||theta||^2` in the model-size setting).
//! - `excess` risk is `E ||beta_hat - beta^0||^2`; `total = excess + sigma2`.
//! - The exact finite-sample formulas split at the interpolation threshold:
//!   they hold for `n < p - 1` and `n > p + 1` and are undefined on the band
//!   `p - 1 <= n <= p + 1`, where inverse-Wishart moments diverge. The band
//!   is reported explicitly as [`Regime::Threshold`], never interpolated.

use crate::error::{Error, Result};

/// Which side of the interpolation threshold a problem size falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `n < p - 1`: fewer samples than coefficients.
    Underparam,
    /// `n > p + 1`: more samples than coefficients.
    Overparam,
    /// `p - 1 <= n <= p + 1`: closed forms undefined.
    Threshold,
}

pub fn regime(n: usize, p: usize) -> Regime {
    let n = n as i64;
    let p = p as i64;
    if n < p - 1 {
        Regime::Underparam
    } else if n > p + 1 {
        Regime::Overparam
    } else {
        Regime::Threshold
    }
}

/// A closed-form risk value tagged with its regime. Threshold-regime values
/// carry no numbers.
#[derive(Debug, Clone, Copy)]
pub struct RegimeRisk {
    pub regime: Regime,
    pub excess: Option<f64>,
    pub total: Option<f64>,
}

impl RegimeRisk {
    fn defined(regime: Regime, excess: f64, sigma2: f64) -> Self {
        RegimeRisk {
            regime,
            excess: Some(excess),
            total: Some(excess + sigma2),
        }
    }

    fn threshold() -> Self {
        RegimeRisk {
            regime: Regime::Threshold,
            excess: None,
            total: None,
        }
    }
}

/// Problem-size scalars bundled for the CLI theory table.
#[derive(Debug, Clone, Copy)]
pub struct ProblemScalars {
    pub n: usize,
    pub p: usize,
    pub sigma2: f64,
    pub b2: f64,
}

impl ProblemScalars {
    /// Aspect ratio `c = p / n`.
    pub fn aspect_ratio(&self) -> f64 {
        self.p as f64 / self.n as f64
    }
}

/// Expected ridge test risk conditional on the design spectrum:
/// `sum_i (b2 lambda^2 / p + sigma2 u_i^2) / (u_i^2 + lambda)^2 + sigma2`,
/// where `u` holds the singular values of `X`.
pub fn ridge_risk_given_spectrum(
    u: &[f64],
    lambda: f64,
    sigma2: f64,
    b2: f64,
    p: usize,
) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::Domain(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    if lambda == 0.0 && u.iter().any(|&ui| ui == 0.0) {
        return Err(Error::Singular(
            "lambda = 0 with a zero singular value: ridge risk undefined".into(),
        ));
    }
    let p = p as f64;
    let mut sum = 0.0;
    for &ui in u {
        let u2 = ui * ui;
        sum += (b2 * lambda * lambda / p + sigma2 * u2) / ((u2 + lambda) * (u2 + lambda));
    }
    Ok(sum + sigma2)
}

/// Risk-minimizing ridge penalty `lambda = p sigma2 / b2`.
pub fn ridge_optimal_lambda(p: usize, sigma2: f64, b2: f64) -> Result<f64> {
    if b2 <= 0.0 {
        return Err(Error::Domain(
            "b2 must be positive (b2 = 0 would demand infinite shrinkage)".into(),
        ));
    }
    Ok(p as f64 * sigma2 / b2)
}

/// Per-coordinate dropout rates that make the dropout penalty equal the
/// optimal ridge penalty: `gamma_i = b2 m_i / (p sigma2 + b2 m_i)` with
/// `m_i = (X^T X)_{ii}`.
pub fn generalized_dropout_rates(m: &[f64], p: usize, sigma2: f64, b2: f64) -> Result<Vec<f64>> {
    if b2 <= 0.0 {
        return Err(Error::Domain("b2 must be positive".into()));
    }
    if sigma2 < 0.0 {
        return Err(Error::Domain("sigma2 must be nonnegative".into()));
    }
    m.iter()
        .map(|&mi| {
            if mi <= 0.0 {
                Err(Error::Domain(format!(
                    "diagonal Gram entries must be positive, got {mi}"
                )))
            } else {
                Ok(b2 * mi / (p as f64 * sigma2 + b2 * mi))
            }
        })
        .collect()
}

/// Bounds on the excess risk of the scalar-rate dropout estimator at penalty
/// strength `alpha = (1 - gamma) / gamma`, given the extreme eigenvalues
/// `tau_1 >= tau_p` of `diag(X^T X)^{-1} X^T X` and `e_1 >= e_p` of
/// `diag(X^T X)^{-1} X^T X diag(X^T X)^{-1}`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarDropoutBounds {
    pub lower: f64,
    pub upper: f64,
    /// Penalty strength minimizing the upper bound:
    /// `alpha_opt = p sigma2 e_1 / (b2 tau_p)`.
    pub alpha_opt: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn scalar_dropout_bounds(
    tau1: f64,
    taup: f64,
    e1: f64,
    ep: f64,
    p: usize,
    sigma2: f64,
    b2: f64,
    alpha: f64,
) -> Result<ScalarDropoutBounds> {
    if taup <= 0.0 || tau1 < taup {
        return Err(Error::Domain(format!(
            "need tau_1 >= tau_p > 0, got tau_1 = {tau1}, tau_p = {taup}"
        )));
    }
    if ep < 0.0 || e1 < ep {
        return Err(Error::Domain(format!(
            "need e_1 >= e_p >= 0, got e_1 = {e1}, e_p = {ep}"
        )));
    }
    if alpha < 0.0 {
        return Err(Error::Domain(format!(
            "alpha must be nonnegative, got {alpha}"
        )));
    }
    let pf = p as f64;
    let lower = (b2 * alpha * alpha + pf * sigma2 * ep) / ((tau1 + alpha) * (tau1 + alpha));
    let upper = (b2 * alpha * alpha + pf * sigma2 * e1) / ((taup + alpha) * (taup + alpha));
    let alpha_opt = pf * sigma2 * e1 / (b2 * taup);
    Ok(ScalarDropoutBounds {
        lower,
        upper,
        alpha_opt,
    })
}

/// Exact expected risk of the spectral dropout estimator
/// `gamma (X*^T X*)^+ X*^T y`:
///
/// - underparam: `b2 (1 + (n/p)(gamma^2 - 2 gamma)) + sigma2 gamma^2 n / (p - n - 1) + sigma2`
/// - overparam:  `b2 (gamma - 1)^2 + sigma2 p gamma^2 / (n - p - 1) + sigma2`
pub fn spectral_risk(n: usize, p: usize, gamma: f64, sigma2: f64, b2: f64) -> Result<RegimeRisk> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Domain(format!(
            "gamma must lie in [0, 1], got {gamma}"
        )));
    }
    let nf = n as f64;
    let pf = p as f64;
    Ok(match regime(n, p) {
        Regime::Underparam => {
            let excess = b2 * (1.0 + nf / pf * (gamma * gamma - 2.0 * gamma))
                + sigma2 * gamma * gamma * nf / (pf - nf - 1.0);
            RegimeRisk::defined(Regime::Underparam, excess, sigma2)
        }
        Regime::Overparam => {
            let excess = b2 * (gamma - 1.0) * (gamma - 1.0)
                + sigma2 * pf * gamma * gamma / (nf - pf - 1.0);
            RegimeRisk::defined(Regime::Overparam, excess, sigma2)
        }
        Regime::Threshold => RegimeRisk::threshold(),
    })
}

/// Risk-minimizing present rate for the spectral estimator and the risk it
/// attains:
///
/// - `gamma_opt = b2 / (b2 + sigma2 p / (p - n - 1))` (underparam) or
///   `b2 / (b2 + sigma2 p / (n - p - 1))` (overparam);
/// - optimal total risk `b2 + sigma2 - n b2^2 / (p (b2 + sigma2 p / (p-n-1)))`
///   (underparam) or `p sigma2 b2 / ((n-p-1) b2 + sigma2 p) + sigma2`
///   (overparam).
pub fn spectral_optimal(n: usize, p: usize, sigma2: f64, b2: f64) -> Result<(f64, RegimeRisk)> {
    if b2 <= 0.0 {
        return Err(Error::Domain("b2 must be positive".into()));
    }
    let nf = n as f64;
    let pf = p as f64;
    match regime(n, p) {
        Regime::Underparam => {
            let denom = b2 + sigma2 * pf / (pf - nf - 1.0);
            let gamma = b2 / denom;
            let excess = b2 - nf * b2 * b2 / (pf * denom);
            Ok((gamma, RegimeRisk::defined(Regime::Underparam, excess, sigma2)))
        }
        Regime::Overparam => {
            let gamma = b2 / (b2 + sigma2 * pf / (nf - pf - 1.0));
            let excess = pf * sigma2 * b2 / ((nf - pf - 1.0) * b2 + sigma2 * pf);
            Ok((gamma, RegimeRisk::defined(Regime::Overparam, excess, sigma2)))
        }
        Regime::Threshold => Err(Error::ThresholdRegime(format!(
            "optimal dropout rate undefined for p - 1 <= n <= p + 1 (n = {n}, p = {p})"
        ))),
    }
}

/// Taylor-expanded risk of the scalar dropout estimator at small coupling
/// `alpha = gamma / (1 - gamma)`, valid for `alpha <= 1 / (1 + sqrt(p/n))^2`
/// (the eigenvalue restriction that makes the expansion converge) and n >= 3:
///
/// `{1 - 2a + a^2 (p/n)(3 + 2/(n-2))} b2 + a^2 p/(n-2)
///  + a^3 (p/(n-2))((p-1)/n + 1) + a^4 (4p^2 - 2p - 1 + n)/(n(n-2))`
pub fn taylor_risk(n: usize, p: usize, alpha: f64, b2: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::Domain(format!(
            "taylor risk needs n >= 3 (inverse chi-square moment), got n = {n}"
        )));
    }
    let nf = n as f64;
    let pf = p as f64;
    let bound = 1.0 / (1.0 + (pf / nf).sqrt()).powi(2);
    if !(0.0..=1.0).contains(&alpha) || alpha > bound {
        return Err(Error::Domain(format!(
            "alpha = {alpha} outside the eigenvalue restriction [0, {bound:.6}] \
             (largest correlation eigenvalue (1 + sqrt(p/n))^2 must stay below 1/alpha)"
        )));
    }
    let a2 = alpha * alpha;
    let a3 = a2 * alpha;
    let a4 = a3 * alpha;
    let term1 = (1.0 - 2.0 * alpha + a2 * (pf / nf) * (3.0 + 2.0 / (nf - 2.0))) * b2;
    let term2 = a2 * pf / (nf - 2.0);
    let term3 = a3 * (pf / (nf - 2.0)) * ((pf - 1.0) / nf + 1.0);
    let term4 = a4 * (4.0 * pf * pf - 2.0 * pf - 1.0 + nf) / (nf * (nf - 2.0));
    Ok(term1 + term2 + term3 + term4)
}

/// Noise level seen by a k-dimensional projected model: the out-of-model
/// energy acts as extra noise, `sigma_tilde^2 = sigma2 + (p-k)/p * theta2`.
pub fn modelwise_sigma_tilde2(k: usize, p: usize, sigma2: f64, theta2: f64) -> f64 {
    sigma2 + (p - k) as f64 / p as f64 * theta2
}

/// Expected test risk of the k-dimensional projected dropout model,
/// conditional on the rotated spectrum `q` and penalized diagonal `h` with
/// per-mode couplings `alpha`:
///
/// `sigma2 + (1 - k/p) theta2
///  + sum_i [ sigma_tilde^2 q_i + (theta2/p) (h_i alpha_i)^2 ] / (q_i + h_i alpha_i)^2`
///
/// The bias numerator carries `(h_i alpha_i)^2 / p`: that is the form the
/// derivation's rotated-bias term produces and the one Monte Carlo over
/// `(Q, X, eps)` confirms.
#[allow(clippy::too_many_arguments)]
pub fn modelwise_risk_given_spectrum(
    q: &[f64],
    h: &[f64],
    alpha: &[f64],
    k: usize,
    p: usize,
    sigma2: f64,
    theta2: f64,
) -> Result<f64> {
    if q.len() != k || h.len() != k || alpha.len() != k {
        return Err(Error::InvalidDimension(format!(
            "need k = {k} entries in q, h, alpha; got {}, {}, {}",
            q.len(),
            h.len(),
            alpha.len()
        )));
    }
    if k > p {
        return Err(Error::InvalidDimension(format!("k = {k} exceeds p = {p}")));
    }
    let pf = p as f64;
    let st2 = modelwise_sigma_tilde2(k, p, sigma2, theta2);
    let mut sum = 0.0;
    for i in 0..k {
        if q[i] < 0.0 || h[i] < 0.0 {
            return Err(Error::Domain(format!(
                "spectrum entries must be nonnegative, got q[{i}] = {}, h[{i}] = {}",
                q[i], h[i]
            )));
        }
        let ha = h[i] * alpha[i];
        let denom = q[i] + ha;
        if denom == 0.0 {
            return Err(Error::Singular(format!(
                "q[{i}] + h[{i}] alpha[{i}] = 0: projected system singular"
            )));
        }
        sum += (st2 * q[i] + theta2 / pf * ha * ha) / (denom * denom);
    }
    Ok(sigma2 + (1.0 - k as f64 / pf) * theta2 + sum)
}

/// Risk-minimizing per-mode couplings for the projected model:
/// `alpha_i = p sigma_tilde^2 / (h_i theta2)`, so that every effective
/// penalty `h_i alpha_i` equals `p sigma_tilde^2 / theta2`. Also returns
/// `sigma_tilde^2`.
pub fn modelwise_optimal_alpha(
    h: &[f64],
    k: usize,
    p: usize,
    sigma2: f64,
    theta2: f64,
) -> Result<(Vec<f64>, f64)> {
    if theta2 <= 0.0 {
        return Err(Error::Domain("theta2 must be positive".into()));
    }
    if k == 0 || h.len() != k {
        return Err(Error::InvalidDimension(format!(
            "need k >= 1 diagonal entries, got k = {k}, len = {}",
            h.len()
        )));
    }
    let st2 = modelwise_sigma_tilde2(k, p, sigma2, theta2);
    let alpha = h
        .iter()
        .map(|&hi| {
            if hi <= 0.0 {
                Err(Error::Domain(format!(
                    "penalized diagonal entries must be positive, got {hi}"
                )))
            } else {
                Ok(p as f64 * st2 / (hi * theta2))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((alpha, st2))
}

/// Risk of the projected model at the optimal couplings, conditional on the
/// spectrum: `sigma_tilde^2 + sum_i sigma_tilde^2 / (q_i + p sigma_tilde^2 / theta2)`.
pub fn modelwise_optimal_risk_given_spectrum(
    q: &[f64],
    k: usize,
    p: usize,
    sigma2: f64,
    theta2: f64,
) -> Result<f64> {
    if theta2 <= 0.0 {
        return Err(Error::Domain("theta2 must be positive".into()));
    }
    if q.len() != k {
        return Err(Error::InvalidDimension(format!(
            "need k = {k} eigenvalues, got {}",
            q.len()
        )));
    }
    let st2 = modelwise_sigma_tilde2(k, p, sigma2, theta2);
    let shift = p as f64 * st2 / theta2;
    let mut sum = 0.0;
    for (i, &qi) in q.iter().enumerate() {
        if qi < 0.0 {
            return Err(Error::Domain(format!(
                "eigenvalues must be nonnegative, got q[{i}] = {qi}"
            )));
        }
        sum += st2 / (qi + shift);
    }
    Ok(st2 + sum)
}

/// Companion Stieltjes transform of the Marchenko-Pastur law at `-lambda`:
/// `m(-lambda) = (-(1 - c + lambda) + sqrt((1 - c + lambda)^2 + 4 c lambda)) / (2 c lambda)`.
pub fn mp_stieltjes(c: f64, lambda: f64) -> Result<f64> {
    if c <= 0.0 || lambda <= 0.0 {
        return Err(Error::Domain(format!(
            "mp_stieltjes needs c > 0 and lambda > 0, got c = {c}, lambda = {lambda}"
        )));
    }
    let b = 1.0 - c + lambda;
    Ok((-b + (b * b + 4.0 * c * lambda).sqrt()) / (2.0 * c * lambda))
}

/// Analytic derivative `m'(-lambda) = (d/dz) m(z) |_{z = -lambda}`, obtained
/// by differentiating the closed-form surd (no finite differences).
pub fn mp_stieltjes_deriv(c: f64, lambda: f64) -> Result<f64> {
    if c <= 0.0 || lambda <= 0.0 {
        return Err(Error::Domain(format!(
            "mp_stieltjes_deriv needs c > 0 and lambda > 0, got c = {c}, lambda = {lambda}"
        )));
    }
    let b = 1.0 - c + lambda;
    let d = b * b + 4.0 * c * lambda;
    let sq = d.sqrt();
    // g(lambda) := m(-lambda); m'(-lambda) = -g'(lambda).
    let g_prime = ((-1.0 + (b + 2.0 * c) / sq) * lambda - (-b + sq)) / (2.0 * c * lambda * lambda);
    Ok(-g_prime)
}

/// Asymptotic risk of the dropout estimator under `p/n -> c` and
/// `diag(X^T X)/n -> I`:
/// `sigma2 + lambda^2 b2 m'(-lambda) + c sigma2 (m(-lambda) - lambda m'(-lambda))`.
pub fn asymptotic_risk(c: f64, lambda: f64, sigma2: f64, b2: f64) -> Result<f64> {
    let m = mp_stieltjes(c, lambda)?;
    let md = mp_stieltjes_deriv(c, lambda)?;
    Ok(sigma2 + lambda * lambda * b2 * md + c * sigma2 * (m - lambda * md))
}

/// Asymptotically optimal present rate `gamma_hat = b2 / (c sigma2 + b2)`
/// and the risk the estimator attains there.
///
/// The risk is [`asymptotic_risk`] evaluated at the optimal normalized
/// penalty `lambda_hat = (1 - gamma_hat)/gamma_hat = c sigma2 / b2`; the
/// derivative terms cancel at that point, collapsing the value to
/// `sigma2 (1 + c m(-lambda_hat))`, the classical optimally-tuned ridge
/// limit. In the noiseless case the penalty vanishes and the risk is the
/// pure null-space loss: `0` for `c <= 1`, `b2 (1 - 1/c)` for `c > 1`.
pub fn asymptotic_optimal(c: f64, sigma2: f64, b2: f64) -> Result<(f64, f64)> {
    if c <= 0.0 {
        return Err(Error::Domain(format!("c must be positive, got {c}")));
    }
    if b2 <= 0.0 {
        return Err(Error::Domain("b2 must be positive".into()));
    }
    let gamma = b2 / (c * sigma2 + b2);
    if sigma2 == 0.0 {
        let risk = if c > 1.0 { b2 * (1.0 - 1.0 / c) } else { 0.0 };
        return Ok((gamma, risk));
    }
    let lambda_hat = c * sigma2 / b2;
    let risk = asymptotic_risk(c, lambda_hat, sigma2, b2)?;
    Ok((gamma, risk))
}
