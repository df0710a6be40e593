//! Eigenvalue machinery: sample correlation matrices, Marchenko-Pastur edge
//! predictions, Cauchy interlacing audits, and the eigenvalue pairs the
//! scalar-rate risk bounds consume.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{general_eigenvalues, singular_values, sym_eigen};

/// Sorted spectrum of a sample correlation/covariance object together with
/// the Marchenko-Pastur edge predictions for its aspect ratio.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    /// Eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub mp_upper: f64,
    pub mp_lower: f64,
    pub n: usize,
    pub p: usize,
}

fn column_norms_sq(x: &ArrayView2<f64>) -> Result<Vec<f64>> {
    let mut norms = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let col = x.column(j);
        let s = col.dot(&col);
        if s == 0.0 {
            return Err(Error::DegenerateColumn {
                index: j,
                reason: "zero column norm".into(),
            });
        }
        norms.push(s);
    }
    Ok(norms)
}

/// Sample correlation matrix `C = D^{-1/2} X^T X D^{-1/2}` with
/// `D = diag(X^T X)`. Unit diagonal, symmetric.
pub fn correlation_matrix(x: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let norms = column_norms_sq(x)?;
    let p = x.ncols();
    let xf = crate::linalg::to_faer(x);
    let g = xf.transpose() * &xf;
    let mut c = Array2::zeros((p, p));
    for i in 0..p {
        c[[i, i]] = 1.0;
        for j in (i + 1)..p {
            let v = g[(i, j)] / (norms[i] * norms[j]).sqrt();
            c[[i, j]] = v;
            c[[j, i]] = v;
        }
    }
    Ok(c)
}

/// Largest and smallest eigenvalues of a symmetric matrix.
pub fn extreme_eigenvalues(m: &ArrayView2<f64>) -> Result<(f64, f64)> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut max_abs = 0.0f64;
    let mut max_asym = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            max_abs = max_abs.max(m[[i, j]].abs());
            max_asym = max_asym.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    if max_asym > 1e-10 * max_abs.max(1.0) {
        return Err(Error::Shape(format!(
            "matrix is not symmetric: max |A - A^T| = {max_asym:.3e}"
        )));
    }
    let eig = sym_eigen(m)?;
    Ok((eig.values[0], *eig.values.last().unwrap()))
}

/// Marchenko-Pastur bulk edges for aspect ratio `c = p/n`:
/// `((1 + sqrt(p/n))^2, (1 - sqrt(p/n))^2)`.
pub fn mp_edges(n: usize, p: usize) -> (f64, f64) {
    let r = (p as f64 / n as f64).sqrt();
    ((1.0 + r) * (1.0 + r), (1.0 - r) * (1.0 - r))
}

/// Correlation spectrum of `X` bundled with its MP edge predictions.
pub fn spectral_summary(x: &ArrayView2<f64>) -> Result<SpectralSummary> {
    let c = correlation_matrix(x)?;
    let eig = sym_eigen(&c.view())?;
    let (upper, lower) = mp_edges(x.nrows(), x.ncols());
    Ok(SpectralSummary {
        eigenvalues: eig.values,
        mp_upper: upper,
        mp_lower: lower,
        n: x.nrows(),
        p: x.ncols(),
    })
}

/// The two spectra the scalar-rate risk bounds need, both descending:
/// `tau` = eigenvalues of `D^{-1} X^T X` (shared with the correlation matrix
/// by a similarity argument) computed through the general eigensolver, and
/// `e` = eigenvalues of the symmetric `D^{-1} X^T X D^{-1}`.
pub fn theorem1_spectra(x: &ArrayView2<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let norms = column_norms_sq(x)?;
    let p = x.ncols();
    let xf = crate::linalg::to_faer(x);
    let g = xf.transpose() * &xf;

    // tau: nonsymmetric route D^{-1} X^T X, kept independent of the
    // correlation-matrix route so the similarity identity stays a real check.
    let a = Array2::from_shape_fn((p, p), |(i, j)| g[(i, j)] / norms[i]);
    let ev = general_eigenvalues(&a.view())?;
    let mut tau = Vec::with_capacity(p);
    for (re, im) in ev {
        if im.abs() > 1e-8 * re.abs().max(1.0) {
            return Err(Error::Singular(format!(
                "similar-to-symmetric matrix produced complex eigenvalue {re} + {im}i"
            )));
        }
        tau.push(re);
    }
    tau.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let e_mat = Array2::from_shape_fn((p, p), |(i, j)| g[(i, j)] / (norms[i] * norms[j]));
    let e_sym = &e_mat + &e_mat.t();
    let e_eig = sym_eigen(&e_sym.mapv(|v| 0.5 * v).view())?;
    Ok((tau, e_eig.values))
}

/// Result of a row-append interlacing audit.
#[derive(Debug, Clone, Copy)]
pub struct InterlacingReport {
    /// True iff every descending singular value of the appended design is at
    /// least the matching value of the original, within `1e-10`.
    pub holds: bool,
    /// Largest observed deficit `u_i - u~_i` (negative when interlacing holds
    /// strictly).
    pub max_deficit: f64,
}

/// Check that appending one row to a design does not decrease any singular
/// value. `x_big` must contain `x_small` as its leading rows.
pub fn interlacing_check(
    x_small: &ArrayView2<f64>,
    x_big: &ArrayView2<f64>,
) -> Result<InterlacingReport> {
    let (n, p) = (x_small.nrows(), x_small.ncols());
    if x_big.ncols() != p || x_big.nrows() != n + 1 {
        return Err(Error::Input(format!(
            "expected appended design of shape {}x{p}, got {}x{}",
            n + 1,
            x_big.nrows(),
            x_big.ncols()
        )));
    }
    for i in 0..n {
        for j in 0..p {
            if x_big[[i, j]] != x_small[[i, j]] {
                return Err(Error::Input(format!(
                    "row prefix mismatch at ({i}, {j}): appended design must extend the original"
                )));
            }
        }
    }
    let u_small = singular_values(x_small)?;
    let u_big = singular_values(x_big)?;
    let mut max_deficit = f64::NEG_INFINITY;
    for (i, &u) in u_small.iter().enumerate() {
        max_deficit = max_deficit.max(u - u_big[i]);
    }
    Ok(InterlacingReport {
        holds: max_deficit <= 1e-10,
        max_deficit,
    })
}

/// Operator-norm deviation of `diag(X^T X)/n` from the identity, i.e.
/// `max_i | ||x_col_i||^2 / n - 1 |`.
pub fn diag_concentration(x: &ArrayView2<f64>) -> f64 {
    let n = x.nrows() as f64;
    let mut worst = 0.0f64;
    for j in 0..x.ncols() {
        let col = x.column(j);
        worst = worst.max((col.dot(&col) / n - 1.0).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, sample_beta_star};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1, Array2};
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = crate::seed::rng_from(seed);
        Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn correlation_orthogonal_equal_norm_columns_is_identity() {
        let mut x = Array2::<f64>::zeros((6, 3));
        x[[0, 0]] = 2.0;
        x[[1, 1]] = 2.0;
        x[[2, 2]] = 2.0;
        let c = correlation_matrix(&x.view()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(c[[i, j]], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn correlation_duplicate_column_has_unit_entry() {
        let base = gaussian(10, 1, 1);
        let mut x = Array2::zeros((10, 2));
        for i in 0..10 {
            x[[i, 0]] = base[[i, 0]];
            x[[i, 1]] = 2.5 * base[[i, 0]];
        }
        let c = correlation_matrix(&x.view()).unwrap();
        assert_abs_diff_eq!(c[[0, 1]], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn correlation_zero_column_rejected() {
        let mut x = gaussian(5, 3, 2);
        for i in 0..5 {
            x[[i, 1]] = 0.0;
        }
        match correlation_matrix(&x.view()) {
            Err(Error::DegenerateColumn { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected degenerate column error, got {other:?}"),
        }
    }

    #[test]
    fn correlation_largest_eigenvalue_near_mp_edge() {
        let x = gaussian(500, 250, 3);
        let c = correlation_matrix(&x.view()).unwrap();
        let (top, _) = extreme_eigenvalues(&c.view()).unwrap();
        let (edge, _) = mp_edges(500, 250);
        assert!(
            (top - edge).abs() / edge < 0.10,
            "largest eigenvalue {top} vs edge {edge}"
        );
    }

    #[test]
    fn correlation_smallest_eigenvalue_for_wide_designs_is_zero() {
        let x = gaussian(20, 40, 4);
        let c = correlation_matrix(&x.view()).unwrap();
        let (_, bottom) = extreme_eigenvalues(&c.view()).unwrap();
        assert!(bottom >= -1e-10);
        assert!(bottom.abs() < 1e-8);
    }

    #[test]
    fn extreme_eigenvalues_diagonal_cases() {
        let eye = Array2::<f64>::eye(4);
        assert_eq!(extreme_eigenvalues(&eye.view()).unwrap(), (1.0, 1.0));
        let d = Array2::from_diag(&array![3.0, 1.0, -2.0]);
        let (hi, lo) = extreme_eigenvalues(&d.view()).unwrap();
        assert_abs_diff_eq!(hi, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lo, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn extreme_eigenvalues_match_full_decomposition() {
        let a = gaussian(20, 20, 5);
        let sym = (&a + &a.t()).mapv(|v| 0.5 * v);
        let (hi, lo) = extreme_eigenvalues(&sym.view()).unwrap();
        let eig = sym_eigen(&sym.view()).unwrap();
        assert_abs_diff_eq!(hi, eig.values[0], epsilon = 1e-10);
        assert_abs_diff_eq!(lo, *eig.values.last().unwrap(), epsilon = 1e-10);
    }

    #[test]
    fn extreme_eigenvalues_reject_asymmetry() {
        let mut a = Array2::<f64>::eye(3);
        a[[0, 1]] = 0.5;
        assert!(matches!(
            extreme_eigenvalues(&a.view()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn mp_edges_pinned_values() {
        // Values the reference spectrum trace reports at p = 500.
        assert_abs_diff_eq!(mp_edges(101, 500).0, 10.4004366444047, epsilon = 1e-10);
        assert_abs_diff_eq!(mp_edges(501, 500).0, 3.9960069870247, epsilon = 1e-10);
        assert_abs_diff_eq!(mp_edges(1001, 500).0, 2.91300748498093, epsilon = 1e-10);
        let (_, lower) = mp_edges(500, 500);
        assert_eq!(lower, 0.0);
    }

    #[test]
    fn theorem1_scalar_diagonal_scaling() {
        // Columns with identical norms c: tau = eig(X^T X)/c, e = tau/c.
        let mut x = gaussian(30, 4, 6);
        let target = 2.0f64;
        for j in 0..4 {
            let norm = x.column(j).dot(&x.column(j)).sqrt();
            let s = target / norm;
            for i in 0..30 {
                x[[i, j]] *= s;
            }
        }
        let c2 = target * target;
        let (tau, e) = theorem1_spectra(&x.view()).unwrap();
        let eig = sym_eigen(&x.t().dot(&x).view()).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(tau[i], eig.values[i] / c2, epsilon = 1e-8);
            assert_abs_diff_eq!(e[i], eig.values[i] / (c2 * c2), epsilon = 1e-8);
        }
    }

    #[test]
    fn theorem1_tau_equals_correlation_spectrum() {
        let x = gaussian(50, 20, 7);
        let (tau, _) = theorem1_spectra(&x.view()).unwrap();
        let c = correlation_matrix(&x.view()).unwrap();
        let eig = sym_eigen(&c.view()).unwrap();
        for i in 0..20 {
            assert_abs_diff_eq!(tau[i], eig.values[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn theorem1_e_spectrum_bound_audit() {
        let x = gaussian(50, 20, 8);
        let (_, e) = theorem1_spectra(&x.view()).unwrap();
        assert!(*e.last().unwrap() >= -1e-10);
        let (edge, _) = mp_edges(50, 20);
        let max_inv_norm = (0..20)
            .map(|j| 1.0 / x.column(j).dot(&x.column(j)))
            .fold(f64::MIN, f64::max)
            .max(0.0);
        assert!(e[0] <= edge * max_inv_norm * 1.25);
    }

    #[test]
    fn interlacing_zero_row_append_is_equality() {
        let x = gaussian(10, 6, 9);
        let mut big = Array2::zeros((11, 6));
        for i in 0..10 {
            for j in 0..6 {
                big[[i, j]] = x[[i, j]];
            }
        }
        let rep = interlacing_check(&x.view(), &big.view()).unwrap();
        assert!(rep.holds);
        assert!(rep.max_deficit.abs() <= 1e-10);
    }

    #[test]
    fn interlacing_random_appends_hold() {
        for seed in 0..1000u64 {
            let beta = sample_beta_star(10, seed).unwrap();
            let ds = generate_dataset(31, 10, &beta, 0.0, seed).unwrap();
            let x = ds.x;
            let small = x.slice(ndarray::s![..30, ..]);
            let rep = interlacing_check(&small, &x.view()).unwrap();
            assert!(rep.holds, "seed {seed}: deficit {}", rep.max_deficit);
        }
    }

    #[test]
    fn interlacing_rejects_unrelated_designs() {
        let a = gaussian(10, 4, 10);
        let b = gaussian(11, 4, 11);
        assert!(matches!(
            interlacing_check(&a.view(), &b.view()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn diag_concentration_cases() {
        // Columns of +-1 entries have norm^2 exactly n.
        let mut rng = crate::seed::rng_from(12);
        use rand::Rng;
        let x = Array2::from_shape_fn((40, 7), |_| {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        });
        assert_eq!(diag_concentration(&x.view()), 0.0);

        let g = gaussian(10_000, 100, 13);
        assert!(diag_concentration(&g.view()) < 0.1);
    }

    #[test]
    fn spectral_summary_carries_edges() {
        let x = gaussian(80, 30, 14);
        let s = spectral_summary(&x.view()).unwrap();
        assert_eq!(s.eigenvalues.len(), 30);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let (upper, lower) = mp_edges(80, 30);
        assert_eq!((s.mp_upper, s.mp_lower), (upper, lower));
        let _ = Array1::from(s.eigenvalues);
    }
}
