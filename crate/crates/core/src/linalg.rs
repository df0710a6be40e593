//! Dense linear algebra helpers on top of `faer`, with `ndarray` containers.
//!
//! All decomposition-backed solves route through here. faer's internal
//! parallelism is pinned to sequential so that numerical results depend only
//! on inputs, never on the worker-pool shape; throughput comes from
//! trial-level parallelism in the sweep harness instead.

use std::sync::Once;

use faer::linalg::solvers::Solve as _;
use faer::{Mat, Side};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

static FAER_SEQ: Once = Once::new();

fn ensure_sequential_faer() {
    FAER_SEQ.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

pub fn to_faer(a: &ArrayView2<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn to_faer_col(v: &ArrayView1<f64>) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn from_faer(m: faer::MatRef<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

pub fn col_to_array(m: faer::MatRef<'_, f64>) -> Array1<f64> {
    Array1::from_shape_fn(m.nrows(), |i| m[(i, 0)])
}

/// Symmetric eigendecomposition with a deterministic convention: eigenvalues
/// descending, each eigenvector sign-fixed so its first entry of magnitude
/// above `1e-12 * max|v|` is positive.
pub struct SymEigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: Array2<f64>,
}

pub fn sym_eigen(a: &ArrayView2<f64>) -> Result<SymEigen> {
    ensure_sequential_faer();
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!(
            "expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let m = to_faer(a);
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Singular(format!("symmetric eigendecomposition failed: {e:?}")))?;
    let p = a.nrows();
    // faer returns ascending order; flip to descending.
    let mut values = Vec::with_capacity(p);
    let mut vectors = Array2::zeros((p, p));
    let s = evd.S();
    let u = evd.U();
    for out_j in 0..p {
        let in_j = p - 1 - out_j;
        values.push(s[in_j]);
        let mut maxabs = 0.0f64;
        for i in 0..p {
            maxabs = maxabs.max(u[(i, in_j)].abs());
        }
        let tol = 1e-12 * maxabs;
        let mut sign = 1.0;
        for i in 0..p {
            if u[(i, in_j)].abs() > tol {
                sign = u[(i, in_j)].signum();
                break;
            }
        }
        for i in 0..p {
            vectors[[i, out_j]] = sign * u[(i, in_j)];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Singular values of a rectangular matrix, descending.
pub fn singular_values(a: &ArrayView2<f64>) -> Result<Vec<f64>> {
    ensure_sequential_faer();
    to_faer(a)
        .singular_values()
        .map_err(|e| Error::Singular(format!("svd failed: {e:?}")))
}

/// Eigenvalues of a general (not necessarily symmetric) real matrix,
/// returned as (re, im) pairs sorted by descending real part.
pub fn general_eigenvalues(a: &ArrayView2<f64>) -> Result<Vec<(f64, f64)>> {
    ensure_sequential_faer();
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!(
            "expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let ev: Vec<faer::c64> = to_faer(a)
        .eigenvalues()
        .map_err(|e| Error::Singular(format!("eigendecomposition failed: {e:?}")))?;
    let mut out: Vec<(f64, f64)> = ev.into_iter().map(|z| (z.re, z.im)).collect();
    out.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    Ok(out)
}

/// Relative spectral cutoff for pseudoinverse solves on a Gram matrix: a
/// mode is kept iff its eigenvalue exceeds `max(n, p) * eps * lam_max`. The
/// cutoff must act on the Gram (squared-singular-value) scale because the
/// numerical noise floor of computed Gram eigenvalues is itself of order
/// `eps * lam_max`; a singular-value-scale cutoff would keep noise modes.
pub(crate) fn gram_mode_kept(lam: f64, dim_scale: usize, lam_max: f64) -> bool {
    lam > dim_scale as f64 * f64::EPSILON * lam_max
}

/// Minimum-norm least-squares solution via eigendecomposition of the smaller
/// Gram matrix (`X^T X` when n >= p, `X X^T` otherwise) with a spectral
/// pseudoinverse cutoff. Handles every rank pattern.
pub fn min_norm_solve(x: &ArrayView2<f64>, y: &ArrayView1<f64>) -> Result<Array1<f64>> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::InvalidDimension(format!(
            "design has {n} rows but response has {} entries",
            y.len()
        )));
    }
    ensure_sequential_faer();
    let xf = to_faer(x);
    let dim_scale = n.max(p);
    if n >= p {
        let g = xf.transpose() * &xf;
        let eig = sym_eigen(&from_faer(g.as_ref()).view())?;
        let lam_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
        let xty = xf.transpose() * to_faer_col(y);
        let xty = col_to_array(xty.as_ref());
        Ok(apply_spectral_filter(&eig, &xty, |lam| {
            if gram_mode_kept(lam, dim_scale, lam_max) {
                1.0 / lam
            } else {
                0.0
            }
        }))
    } else {
        let g = &xf * xf.transpose();
        let eig = sym_eigen(&from_faer(g.as_ref()).view())?;
        let lam_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
        let w = apply_spectral_filter(&eig, &y.to_owned(), |lam| {
            if gram_mode_kept(lam, dim_scale, lam_max) {
                1.0 / lam
            } else {
                0.0
            }
        });
        let beta = xf.transpose() * to_faer_col(&w.view());
        Ok(col_to_array(beta.as_ref()))
    }
}

/// `V f(Lambda) V^T rhs` for a symmetric eigendecomposition.
pub fn apply_spectral_filter<F: Fn(f64) -> f64>(
    eig: &SymEigen,
    rhs: &Array1<f64>,
    f: F,
) -> Array1<f64> {
    let vt_rhs = eig.vectors.t().dot(rhs);
    let scaled = Array1::from_iter(
        vt_rhs
            .iter()
            .zip(eig.values.iter())
            .map(|(&c, &lam)| f(lam) * c),
    );
    eig.vectors.dot(&scaled)
}

/// Solve the symmetric positive-semidefinite system `m beta = rhs` through an
/// eigendecomposition with pseudoinverse cutoff. Returns an error when the
/// system is singular and `require_full_rank` is set.
pub fn solve_sym_spectral(
    m: &ArrayView2<f64>,
    rhs: &Array1<f64>,
    require_full_rank: bool,
) -> Result<Array1<f64>> {
    let eig = sym_eigen(m)?;
    let dim = m.nrows();
    let lam_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = dim as f64 * f64::EPSILON * lam_max;
    if require_full_rank {
        let lam_min = eig.values.last().copied().unwrap_or(0.0);
        if lam_min <= cutoff {
            return Err(Error::Singular(format!(
                "matrix is singular to working precision (min eigenvalue {lam_min:.3e}, cutoff {cutoff:.3e})"
            )));
        }
    }
    Ok(apply_spectral_filter(&eig, rhs, |lam| {
        if lam > cutoff {
            1.0 / lam
        } else {
            0.0
        }
    }))
}

/// Fast path for the sweep harness: Cholesky when the Gram matrix is
/// numerically positive definite, spectral pseudoinverse fallback otherwise.
/// Produces the same minimum-norm solution as [`min_norm_solve`] up to
/// floating-point roundoff on full-rank systems. A residual check guards
/// against near-singular Grams where the factorization completes but the
/// solve is meaningless (the interpolation threshold); those fall back too.
pub fn min_norm_solve_fast(x: &ArrayView2<f64>, y: &ArrayView1<f64>) -> Result<Array1<f64>> {
    ensure_sequential_faer();
    let (n, p) = (x.nrows(), x.ncols());
    if n >= p {
        let xf = to_faer(x);
        let g = xf.transpose() * &xf;
        if let Ok(llt) = g.llt(Side::Lower) {
            let xty = xf.transpose() * to_faer_col(y);
            let sol = llt.solve(&xty);
            let resid = &g * &sol - &xty;
            let mut r2 = 0.0;
            let mut b2 = 0.0;
            for i in 0..p {
                r2 += resid[(i, 0)] * resid[(i, 0)];
                b2 += xty[(i, 0)] * xty[(i, 0)];
            }
            if r2.sqrt() <= 1e-8 * b2.sqrt().max(f64::MIN_POSITIVE) {
                return Ok(col_to_array(sol.as_ref()));
            }
        }
    }
    min_norm_solve(x, y)
}

/// Thin QR orthonormal factor with the Haar sign convention (diagonal of R
/// positive). `a` must have at least as many rows as columns.
pub fn thin_q_haar(a: &ArrayView2<f64>) -> Result<Array2<f64>> {
    ensure_sequential_faer();
    let (m, k) = (a.nrows(), a.ncols());
    if m < k {
        return Err(Error::Shape(format!(
            "thin QR needs rows >= cols, got {m}x{k}"
        )));
    }
    let qr = to_faer(a).qr();
    let qf = qr.compute_thin_Q();
    let mut q = from_faer(qf.as_ref());
    // R = Q^T A; flip each column of Q so that R[j,j] > 0.
    for j in 0..k {
        let mut rjj = 0.0;
        for i in 0..m {
            rjj += q[[i, j]] * a[[i, j]];
        }
        if rjj < 0.0 {
            for i in 0..m {
                q[[i, j]] = -q[[i, j]];
            }
        }
    }
    Ok(q)
}

/// Pairwise (cascade) summation: deterministic and far more accurate than a
/// running sum for long Monte Carlo accumulations.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Sample mean and standard error of the mean (`sd / sqrt(len)`),
/// computed with pairwise summation in index order.
pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let t = v.len();
    if t == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(v) / t as f64;
    if t == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = v.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (t - 1) as f64;
    (mean, (var / t as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn sym_eigen_descending_and_orthonormal() {
        let a = array![[2.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 1.0]];
        let e = sym_eigen(&a.view()).unwrap();
        assert!(e.values[0] >= e.values[1] && e.values[1] >= e.values[2]);
        let vtv = e.vectors.t().dot(&e.vectors);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(vtv[[i, j]], want, epsilon = 1e-12);
            }
        }
        // Reconstruction.
        let mut recon = Array2::<f64>::zeros((3, 3));
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    recon[[i, j]] += e.values[k] * e.vectors[[i, k]] * e.vectors[[j, k]];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(recon[[i, j]], a[[i, j]], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn min_norm_matches_exact_solution() {
        // Underdetermined: X = [[1, 1]], y = [2] -> min-norm (1, 1).
        let x = array![[1.0, 1.0]];
        let y = array![2.0];
        let b = min_norm_solve(&x.view(), &y.view()).unwrap();
        assert_abs_diff_eq!(b[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fast_path_agrees_with_spectral_path() {
        let mut rng = crate::seed::rng_from(7);
        use rand_distr::{Distribution, StandardNormal};
        let x = Array2::from_shape_fn((40, 12), |_| StandardNormal.sample(&mut rng));
        let y = Array1::from_shape_fn(40, |_| StandardNormal.sample(&mut rng));
        let a = min_norm_solve(&x.view(), &y.view()).unwrap();
        let b = min_norm_solve_fast(&x.view(), &y.view()).unwrap();
        for i in 0..12 {
            assert_abs_diff_eq!(a[i], b[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn pairwise_sum_matches_exact() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499500.0);
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(m, 2.5, epsilon = 1e-15);
        let sd = (5.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(se, sd / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn thin_q_haar_is_orthonormal_with_positive_r_diagonal() {
        let mut rng = crate::seed::rng_from(3);
        use rand_distr::{Distribution, StandardNormal};
        let a = Array2::from_shape_fn((8, 5), |_| StandardNormal.sample(&mut rng));
        let q = thin_q_haar(&a.view()).unwrap();
        let qtq = q.t().dot(&q);
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(qtq[[i, j]], want, epsilon = 1e-12);
            }
        }
        for j in 0..5 {
            let rjj: f64 = (0..8).map(|i| q[[i, j]] * a[[i, j]]).sum();
            assert!(rjj > 0.0);
        }
    }
}
