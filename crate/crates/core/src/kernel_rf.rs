//! Random-feature embeddings and kernel ridge regression induced by dropout
//! on features.
//!
//! Dropping features with present rate `gamma` (inverted scaling `1/gamma` on
//! kept entries) turns the least-squares objective into kernel ridge
//! regression with penalty `lambda = (1 - gamma) / gamma` on the
//! random-feature kernel `K = F F^T`.

use faer::linalg::solvers::Solve as _;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rayon::prelude::*;

use crate::datagen::FeatureWeights;
use crate::error::{Error, Result};
use crate::linalg::{apply_spectral_filter, mean_and_se, sym_eigen, SymEigen};
use crate::seed::{derive, rng_from, tags};

/// A kernel regression instance: PSD kernel matrix, ground-truth dual
/// coefficients, and noise variance.
#[derive(Debug, Clone)]
pub struct KernelSystem {
    pub k: Array2<f64>,
    pub alpha_star: Array1<f64>,
    pub sigma2: f64,
}

/// Eigenvalues below `1e-12 * s_max` are treated as numerically zero and
/// dropped from spectral sums (they would otherwise blow up `sum sigma2/s_i`).
const SPECTRUM_FLOOR: f64 = 1e-12;

impl KernelSystem {
    pub fn new(k: Array2<f64>, alpha_star: Array1<f64>, sigma2: f64) -> Result<Self> {
        let n = k.nrows();
        if k.ncols() != n {
            return Err(Error::Shape(format!(
                "kernel must be square, got {}x{}",
                n,
                k.ncols()
            )));
        }
        if alpha_star.len() != n {
            return Err(Error::InvalidDimension(format!(
                "alpha_star has {} entries for an {n}-sample kernel",
                alpha_star.len()
            )));
        }
        if sigma2 < 0.0 {
            return Err(Error::Domain("sigma2 must be nonnegative".into()));
        }
        let mut max_abs = 0.0f64;
        let mut max_asym = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                max_abs = max_abs.max(k[[i, j]].abs());
                max_asym = max_asym.max((k[[i, j]] - k[[j, i]]).abs());
            }
        }
        if max_asym > 1e-10 * max_abs.max(1.0) {
            return Err(Error::Shape(format!(
                "kernel is not symmetric: max |K - K^T| = {max_asym:.3e}"
            )));
        }
        let sys = KernelSystem {
            k,
            alpha_star,
            sigma2,
        };
        let eig = sys.eigen()?;
        let top = eig.values.first().copied().unwrap_or(0.0);
        let bottom = eig.values.last().copied().unwrap_or(0.0);
        if bottom < -1e-8 * top.abs().max(1.0) {
            return Err(Error::Domain(format!(
                "kernel is not positive semidefinite: min eigenvalue {bottom:.3e}"
            )));
        }
        Ok(sys)
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    fn eigen(&self) -> Result<SymEigen> {
        sym_eigen(&self.k.view())
    }

    /// Eigenvalues above the relative floor, descending.
    fn retained_spectrum(&self) -> Result<Vec<f64>> {
        let eig = self.eigen()?;
        let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
        Ok(eig
            .values
            .iter()
            .copied()
            .filter(|&s| s > SPECTRUM_FLOOR * top)
            .collect())
    }
}

fn lambda_of(gamma: f64) -> Result<f64> {
    if gamma <= 0.0 || gamma > 1.0 {
        return Err(Error::Domain(format!(
            "present rate must lie in (0, 1], got {gamma}"
        )));
    }
    Ok((1.0 - gamma) / gamma)
}

/// `ReLU(X W^T)`: embed `n x d` inputs through `D` random features.
pub fn relu_embed(x: &ArrayView2<f64>, w: &FeatureWeights) -> Result<Array2<f64>> {
    if x.ncols() != w.d {
        return Err(Error::InvalidDimension(format!(
            "inputs have {} columns but weights expect d = {}",
            x.ncols(),
            w.d
        )));
    }
    let mut a = x.dot(&w.w.t());
    a.mapv_inplace(|v| v.max(0.0));
    Ok(a)
}

/// Both sides of the feature-dropout identity
/// `E_B ||y - B a||^2 = ||y - a||^2 + (1-gamma)/gamma sum_j a_j^2`
/// (summed over samples), with `B` diagonal, `B_jj ~ Ber(gamma)/gamma`.
#[derive(Debug, Clone, Copy)]
pub struct DropoutIdentity {
    pub closed: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
}

/// Evaluate the identity's closed form and a Monte Carlo estimate of the
/// left-hand side over `n_masks` feature masks. One mask is drawn per Monte
/// Carlo replicate and applied to every sample; per-mask seeds are derived
/// from `(seed, mask index)` so results are independent of scheduling.
pub fn feature_dropout_identity(
    a: &ArrayView2<f64>,
    y: &ArrayView2<f64>,
    gamma: f64,
    n_masks: usize,
    seed: u64,
) -> Result<DropoutIdentity> {
    let lambda = lambda_of(gamma)?;
    let (n, d_feat) = (a.nrows(), a.ncols());
    if y.nrows() != n {
        return Err(Error::InvalidDimension(format!(
            "targets have {} rows for {n} feature rows",
            y.nrows()
        )));
    }
    if y.ncols() != d_feat {
        return Err(Error::InvalidDimension(format!(
            "identity needs matching widths, got features {d_feat} and targets {}",
            y.ncols()
        )));
    }
    if n_masks == 0 {
        return Err(Error::Domain("n_masks must be at least 1".into()));
    }

    let mut closed = 0.0;
    let mut plain_fit = 0.0;
    for i in 0..n {
        let ai = a.row(i);
        let yi = y.row(i);
        let mut fit = 0.0;
        let mut energy = 0.0;
        for j in 0..d_feat {
            let r = yi[j] - ai[j];
            fit += r * r;
            energy += ai[j] * ai[j];
        }
        plain_fit += fit;
        closed += fit + lambda * energy;
    }
    if gamma == 1.0 {
        // The mask is deterministically the identity.
        return Ok(DropoutIdentity {
            closed,
            mc_mean: plain_fit,
            mc_se: 0.0,
        });
    }

    let values: Vec<f64> = (0..n_masks)
        .into_par_iter()
        .map(|m| {
            let mut rng = rng_from(derive(seed, &[tags::MASK, m as u64]));
            let mut mask = vec![0.0f64; d_feat];
            for mj in mask.iter_mut() {
                *mj = if rng.random::<f64>() < gamma {
                    1.0 / gamma
                } else {
                    0.0
                };
            }
            let mut loss = 0.0;
            for i in 0..n {
                let ai = a.row(i);
                let yi = y.row(i);
                for j in 0..d_feat {
                    let r = yi[j] - mask[j] * ai[j];
                    loss += r * r;
                }
            }
            loss
        })
        .collect();
    let (mc_mean, mc_se) = mean_and_se(&values);
    Ok(DropoutIdentity {
        closed,
        mc_mean,
        mc_se,
    })
}

/// Random-feature inner-product kernel `K = F F^T`, exactly symmetrized.
pub fn kernel_matrix(features: &ArrayView2<f64>) -> Array2<f64> {
    let ff = crate::linalg::to_faer(features);
    let k = &ff * ff.transpose();
    let n = features.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i <= j {
            k[(i, j)]
        } else {
            k[(j, i)]
        }
    })
}

/// Dual solve `alpha_hat = (K + lambda I)^{-1} y` with
/// `lambda = (1-gamma)/gamma`; at `gamma = 1` the pseudoinverse of `K` is
/// used.
pub fn krr_fit(k_sys: &KernelSystem, y: &ArrayView1<f64>, gamma: f64) -> Result<Array1<f64>> {
    let lambda = lambda_of(gamma)?;
    if y.len() != k_sys.n() {
        return Err(Error::InvalidDimension(format!(
            "response has {} entries for an {}-sample kernel",
            y.len(),
            k_sys.n()
        )));
    }
    let eig = k_sys.eigen()?;
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let floor = SPECTRUM_FLOOR * top;
    Ok(apply_spectral_filter(&eig, &y.to_owned(), |s| {
        if lambda > 0.0 {
            1.0 / (s + lambda)
        } else if s > floor {
            1.0 / s
        } else {
            0.0
        }
    }))
}

/// Expected in-sample risk of KRR over fresh noise and an isotropic
/// ground-truth direction of norm `||alpha_star||`, evaluated on the kernel
/// spectrum:
///
/// `sum_i (||alpha*||^2 lambda^2 / p + sigma2) s_i^2 / (s_i + lambda)^2`
///
/// where the sum runs over the retained spectrum and `p` is the retained
/// mode count (the feature count on full-rank random-feature kernels).
pub fn krr_insample_risk(k_sys: &KernelSystem, gamma: f64) -> Result<f64> {
    let lambda = lambda_of(gamma)?;
    let spectrum = k_sys.retained_spectrum()?;
    let p = spectrum.len();
    if p == 0 {
        return Err(Error::Domain("kernel has no numerically nonzero modes".into()));
    }
    let b2 = k_sys.alpha_star.dot(&k_sys.alpha_star);
    let coeff = b2 * lambda * lambda / p as f64 + k_sys.sigma2;
    Ok(spectrum
        .iter()
        .map(|&s| coeff * s * s / ((s + lambda) * (s + lambda)))
        .sum())
}

/// The same expected risk through direct matrix algebra (no
/// eigendecomposition): with `M = (K + lambda I)^{-1} K`,
/// `risk = (||alpha*||^2 lambda^2 / n + sigma2) ||M||_F^2`, since
/// `||M||_F^2 = tr(K^2 (K + lambda I)^{-2})` carries both the bias and the
/// variance structure. Assumes a full-rank kernel (`p = n`); pair with
/// [`krr_insample_risk`] as independent code paths on such systems.
pub fn krr_insample_risk_direct(k_sys: &KernelSystem, gamma: f64) -> Result<f64> {
    let lambda = lambda_of(gamma)?;
    let n = k_sys.n();
    let kf = crate::linalg::to_faer(&k_sys.k.view());
    let mut shifted = kf.clone();
    for i in 0..n {
        shifted[(i, i)] += lambda;
    }
    let lu = shifted.partial_piv_lu();
    let m = lu.solve(&kf);
    let mut frob2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            frob2 += m[(i, j)] * m[(i, j)];
        }
    }
    let b2 = k_sys.alpha_star.dot(&k_sys.alpha_star);
    Ok((b2 * lambda * lambda / n as f64 + k_sys.sigma2) * frob2)
}

/// Per-mode optimal penalties `lambda_i = p sigma2 / (s_i ||alpha*||^2)` and
/// the optimal risk `sum_i sigma2 / s_i` over the retained spectrum.
pub fn krr_optimal(k_sys: &KernelSystem) -> Result<(Vec<f64>, f64)> {
    let spectrum = k_sys.retained_spectrum()?;
    if spectrum.is_empty() {
        return Err(Error::Domain(
            "degenerate kernel: spectrum is numerically zero".into(),
        ));
    }
    let b2 = k_sys.alpha_star.dot(&k_sys.alpha_star);
    if b2 <= 0.0 {
        return Err(Error::Domain(
            "alpha_star must be nonzero for the optimal penalty".into(),
        ));
    }
    let p = spectrum.len() as f64;
    let lambdas: Vec<f64> = spectrum
        .iter()
        .map(|&s| p * k_sys.sigma2 / (s * b2))
        .collect();
    let risk = spectrum.iter().map(|&s| k_sys.sigma2 / s).sum();
    Ok((lambdas, risk))
}

/// Upper bound on the in-sample risk at penalty `lambda = (1-gamma)/gamma`:
/// every retained eigenvalue replaced by the largest, so each per-mode term
/// is maximized (`s^2/(s+lambda)^2` is increasing in `s`).
pub fn krr_upper_bound(k_sys: &KernelSystem, gamma: f64) -> Result<f64> {
    let lambda = lambda_of(gamma)?;
    let spectrum = k_sys.retained_spectrum()?;
    let p = spectrum.len();
    if p == 0 {
        return Err(Error::Domain("kernel has no numerically nonzero modes".into()));
    }
    let s1 = spectrum[0];
    let b2 = k_sys.alpha_star.dot(&k_sys.alpha_star);
    let coeff = b2 * lambda * lambda / p as f64 + k_sys.sigma2;
    Ok(p as f64 * coeff * s1 * s1 / ((s1 + lambda) * (s1 + lambda)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{sample_beta_star, sample_feature_weights};
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = crate::seed::rng_from(seed);
        Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng))
    }

    fn random_system(n: usize, d_feat: usize, sigma2: f64, seed: u64) -> KernelSystem {
        let f = gaussian(n, d_feat, seed);
        let k = kernel_matrix(&f.view());
        let alpha = sample_beta_star(n, seed ^ 0xaaaa).unwrap();
        KernelSystem::new(k, alpha, sigma2).unwrap()
    }

    #[test]
    fn relu_embed_cases() {
        let w = FeatureWeights {
            w: Array2::<f64>::eye(3),
            d: 3,
            feature_count: 3,
        };
        let x = Array2::<f64>::eye(3);
        let a = relu_embed(&x.view(), &w).unwrap();
        assert_eq!(a, Array2::<f64>::eye(3));

        let neg = Array2::from_elem((2, 3), -1.0);
        let wa = FeatureWeights {
            w: Array2::from_elem((4, 3), 1.0),
            d: 3,
            feature_count: 4,
        };
        let z = relu_embed(&neg.view(), &wa).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));

        assert!(matches!(
            relu_embed(&x.view(), &wa_clone_wrong_dim()),
            Err(Error::InvalidDimension(_))
        ));
    }

    fn wa_clone_wrong_dim() -> FeatureWeights {
        FeatureWeights {
            w: Array2::zeros((4, 7)),
            d: 7,
            feature_count: 4,
        }
    }

    #[test]
    fn relu_zero_fraction_near_half() {
        let x = gaussian(100, 10, 1);
        let w = sample_feature_weights(50, 10, 2).unwrap();
        let a = relu_embed(&x.view(), &w).unwrap();
        let zeros = a.iter().filter(|&&v| v == 0.0).count() as f64;
        let frac = zeros / (100.0 * 50.0);
        // Sign symmetry of Gaussians: each entry is zero w.p. 1/2.
        let se = (0.25f64 / (100.0 * 50.0)).sqrt();
        assert!(
            (frac - 0.5).abs() <= 3.0 * se * 10.0,
            "zero fraction {frac}"
        );
    }

    #[test]
    fn feature_identity_degenerate_cases() {
        let a = gaussian(6, 4, 3);
        let y = gaussian(6, 4, 4);
        let id = feature_dropout_identity(&a.view(), &y.view(), 1.0, 50, 5).unwrap();
        let mut fit = 0.0;
        for i in 0..6 {
            for j in 0..4 {
                let r = y[[i, j]] - a[[i, j]];
                fit += r * r;
            }
        }
        assert_abs_diff_eq!(id.closed, fit, epsilon = 1e-12);
        assert_abs_diff_eq!(id.mc_mean, fit, epsilon = 1e-12);
        assert_eq!(id.mc_se, 0.0);

        let zero = Array2::zeros((6, 4));
        let idz = feature_dropout_identity(&zero.view(), &y.view(), 0.4, 50, 6).unwrap();
        let ynorm: f64 = y.iter().map(|v| v * v).sum();
        assert_abs_diff_eq!(idz.closed, ynorm, epsilon = 1e-12);
        assert_abs_diff_eq!(idz.mc_mean, ynorm, epsilon = 1e-12);
    }

    #[test]
    fn feature_identity_mc_agreement() {
        let a = gaussian(8, 5, 7);
        let y = gaussian(8, 5, 8);
        let id = feature_dropout_identity(&a.view(), &y.view(), 0.7, 100_000, 9).unwrap();
        assert!(
            (id.closed - id.mc_mean).abs() <= 3.0 * id.mc_se,
            "closed {} vs mc {} +- {}",
            id.closed,
            id.mc_mean,
            id.mc_se
        );
    }

    #[test]
    fn kernel_matrix_cases() {
        let f = Array2::<f64>::eye(3);
        assert_eq!(kernel_matrix(&f.view()), Array2::<f64>::eye(3));

        let mut rank1 = Array2::zeros((4, 3));
        for j in 0..3 {
            rank1[[1, j]] = (j + 1) as f64;
        }
        let k = kernel_matrix(&rank1.view());
        let eig = sym_eigen(&k.view()).unwrap();
        assert_abs_diff_eq!(eig.values[0], 14.0, epsilon = 1e-10);
        for v in &eig.values[1..] {
            assert!(v.abs() < 1e-10);
        }

        let sys = random_system(20, 30, 0.25, 10);
        let eig = sym_eigen(&sys.k.view()).unwrap();
        assert!(*eig.values.last().unwrap() >= -1e-8 * eig.values[0]);
    }

    #[test]
    fn krr_fit_identity_and_shrinkage() {
        let sys = KernelSystem::new(
            Array2::<f64>::eye(4),
            sample_beta_star(4, 11).unwrap(),
            0.25,
        )
        .unwrap();
        let y = ndarray::array![1.0, 2.0, 3.0, 4.0];
        // lambda = 1 <=> gamma = 0.5
        let alpha = krr_fit(&sys, &y.view(), 0.5).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(alpha[i], y[i] / 2.0, epsilon = 1e-12);
        }
        let tiny = krr_fit(&sys, &y.view(), 1e-9).unwrap();
        assert!(tiny.dot(&tiny).sqrt() < 1e-6);
    }

    #[test]
    fn krr_fit_matches_conjugate_gradient() {
        let sys = random_system(30, 40, 0.25, 12);
        let y = sample_beta_star(30, 13).unwrap();
        let gamma = 0.8;
        let lambda = (1.0 - gamma) / gamma;
        let alpha = krr_fit(&sys, &y.view(), gamma).unwrap();
        // CG on (K + lambda I) x = y.
        let apply = |v: &ndarray::Array1<f64>| -> ndarray::Array1<f64> {
            sys.k.dot(v) + &v.mapv(|z| lambda * z)
        };
        let mut x = ndarray::Array1::<f64>::zeros(30);
        let mut r = y.to_owned();
        let mut p = r.clone();
        let mut rs = r.dot(&r);
        for _ in 0..200 {
            let ap = apply(&p);
            let step = rs / p.dot(&ap);
            x = &x + &p.mapv(|v| step * v);
            r = &r - &ap.mapv(|v| step * v);
            let rs_new = r.dot(&r);
            if rs_new.sqrt() < 1e-14 {
                break;
            }
            p = &r + &p.mapv(|v| rs_new / rs * v);
            rs = rs_new;
        }
        for i in 0..30 {
            assert_abs_diff_eq!(alpha[i], x[i], epsilon = 1e-8);
        }
        // Residual contract.
        let resid = &(sys.k.dot(&alpha) + &alpha.mapv(|v| lambda * v)) - &y;
        assert!(resid.dot(&resid).sqrt() <= 1e-8 * y.dot(&y).sqrt());
    }

    #[test]
    fn krr_fit_interpolates_at_gamma_one() {
        let sys = random_system(15, 20, 0.25, 14);
        let y = sample_beta_star(15, 15).unwrap();
        let alpha = krr_fit(&sys, &y.view(), 1.0).unwrap();
        let pred = sys.k.dot(&alpha);
        for i in 0..15 {
            assert_abs_diff_eq!(pred[i], y[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn krr_risk_limits() {
        // lambda = 0 on an invertible kernel: sigma2 * n.
        let sys = random_system(12, 20, 0.25, 16);
        let r = krr_insample_risk(&sys, 1.0).unwrap();
        assert_abs_diff_eq!(r, 0.25 * 12.0, epsilon = 1e-9);

        // Scalar spectrum with alpha_star = 0: n sigma2 s^2/(s+lambda)^2.
        let s = 2.0;
        let sys2 = KernelSystem::new(
            Array2::<f64>::eye(5).mapv(|v| s * v),
            ndarray::Array1::zeros(5),
            0.25,
        )
        .unwrap();
        let gamma = 0.8;
        let lambda = 0.25;
        let r2 = krr_insample_risk(&sys2, gamma).unwrap();
        assert_abs_diff_eq!(
            r2,
            5.0 * 0.25 * s * s / ((s + lambda) * (s + lambda)),
            epsilon = 1e-12
        );
    }

    #[test]
    fn krr_risk_two_paths_agree() {
        let sys = random_system(30, 45, 0.25, 17);
        for gamma in [0.5, 0.8, 0.95] {
            let a = krr_insample_risk(&sys, gamma).unwrap();
            let b = krr_insample_risk_direct(&sys, gamma).unwrap();
            assert!(
                (a - b).abs() <= 1e-10 * a.abs().max(1.0),
                "gamma {gamma}: eigen {a} vs direct {b}"
            );
        }
    }

    #[test]
    fn krr_optimal_cases() {
        let sys = KernelSystem::new(
            Array2::<f64>::eye(4),
            sample_beta_star(4, 18).unwrap(),
            0.25,
        )
        .unwrap();
        let (lams, risk) = krr_optimal(&sys).unwrap();
        assert_abs_diff_eq!(risk, 1.0, epsilon = 1e-12);
        let b2 = sys.alpha_star.dot(&sys.alpha_star);
        for l in lams {
            assert_abs_diff_eq!(l, 4.0 * 0.25 / b2, epsilon = 1e-12);
        }

        // Doubling the spectrum halves the optimal risk.
        let sys2 = KernelSystem::new(
            Array2::<f64>::eye(4).mapv(|v| 2.0 * v),
            sys.alpha_star.clone(),
            0.25,
        )
        .unwrap();
        let (_, risk2) = krr_optimal(&sys2).unwrap();
        assert_abs_diff_eq!(risk2, 0.5, epsilon = 1e-12);

        let degenerate = KernelSystem::new(
            Array2::zeros((3, 3)),
            sample_beta_star(3, 19).unwrap(),
            0.25,
        )
        .unwrap();
        assert!(matches!(krr_optimal(&degenerate), Err(Error::Domain(_))));
    }

    #[test]
    fn krr_optimal_per_mode_stationarity() {
        // Perturbing each per-mode penalty does not decrease its risk term.
        let sys = random_system(30, 50, 0.25, 20);
        let spectrum: Vec<f64> = sym_eigen(&sys.k.view()).unwrap().values;
        let (lams, _) = krr_optimal(&sys).unwrap();
        let b2 = sys.alpha_star.dot(&sys.alpha_star);
        let p = lams.len() as f64;
        let term = |s: f64, l: f64| (b2 * l * l / p + sys.sigma2) * s * s / ((s + l) * (s + l));
        for (i, &l) in lams.iter().enumerate() {
            let s = spectrum[i];
            let base = term(s, l);
            for dl in [-1e-4, 1e-4] {
                let lp = l + dl;
                if lp >= 0.0 {
                    assert!(
                        term(s, lp) + 1e-12 >= base,
                        "mode {i}: term decreased at lambda {lp}"
                    );
                }
            }
        }
    }

    #[test]
    fn krr_upper_bound_properties() {
        // Constant spectrum: bound is tight.
        let sys = KernelSystem::new(
            Array2::<f64>::eye(6).mapv(|v| 3.0 * v),
            sample_beta_star(6, 21).unwrap(),
            0.25,
        )
        .unwrap();
        let gamma = 0.7;
        assert_abs_diff_eq!(
            krr_upper_bound(&sys, gamma).unwrap(),
            krr_insample_risk(&sys, gamma).unwrap(),
            epsilon = 1e-12
        );

        // Any kernel: bound dominates the risk at the same penalty.
        for seed in 0..50u64 {
            let sys = random_system(15, 25, 0.25, 1000 + seed);
            for gamma in [0.4, 0.8] {
                let bound = krr_upper_bound(&sys, gamma).unwrap();
                let risk = krr_insample_risk(&sys, gamma).unwrap();
                assert!(
                    bound + 1e-12 >= risk,
                    "seed {seed}, gamma {gamma}: bound {bound} < risk {risk}"
                );
            }
        }
    }

    #[test]
    fn krr_optimal_risk_monotone_under_nested_extension() {
        // Random-feature kernels with D < n: appending a sample is a PSD
        // rank-one update of F^T F, so every retained eigenvalue grows and
        // sum sigma2/s_i falls.
        let d_feat = 10;
        let mut f = gaussian(30, d_feat, 22).mapv(|v| v / (d_feat as f64).sqrt());
        let alpha = sample_beta_star(30, 23).unwrap();
        let sys = KernelSystem::new(kernel_matrix(&f.view()), alpha, 0.25).unwrap();
        let (_, mut prev) = krr_optimal(&sys).unwrap();
        let mut rng = crate::seed::rng_from(24);
        for step in 0..200 {
            let n = f.nrows();
            let mut grown = Array2::zeros((n + 1, d_feat));
            grown.slice_mut(ndarray::s![..n, ..]).assign(&f);
            for j in 0..d_feat {
                let z: f64 = StandardNormal.sample(&mut rng);
                grown[[n, j]] = z / (d_feat as f64).sqrt();
            }
            f = grown;
            let alpha = sample_beta_star(n + 1, 25).unwrap();
            let sys = KernelSystem::new(kernel_matrix(&f.view()), alpha, 0.25).unwrap();
            let (_, risk) = krr_optimal(&sys).unwrap();
            assert!(
                risk <= prev + 1e-10,
                "step {step}: optimal risk rose from {prev} to {risk}"
            );
            prev = risk;
        }
    }
}
