//! Synthetic data generators and the IDX binary loader.
//!
//! Every sampler is a pure function of its arguments and seed: repeated calls
//! are bit-identical, which is what makes the sweep harness reproducible
//! across runs and thread counts.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::seed::rng_from;

/// A regression problem instance: design `x` (rows are samples), responses
/// `y`, ground-truth coefficients `beta_star`, and noise variance `sigma2`.
#[derive(Debug, Clone)]
pub struct RegressionDataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub beta_star: Array1<f64>,
    pub sigma2: f64,
}

impl RegressionDataset {
    /// Wrap pre-existing arrays, enforcing dimension consistency.
    pub fn new(
        x: Array2<f64>,
        y: Array1<f64>,
        beta_star: Array1<f64>,
        sigma2: f64,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidDimension(format!(
                "x has {} rows but y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.ncols() != beta_star.len() {
            return Err(Error::InvalidDimension(format!(
                "x has {} columns but beta_star has {} entries",
                x.ncols(),
                beta_star.len()
            )));
        }
        if sigma2 < 0.0 {
            return Err(Error::Domain(format!(
                "sigma2 must be nonnegative, got {sigma2}"
            )));
        }
        Ok(Self {
            x,
            y,
            beta_star,
            sigma2,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// A `k x p` matrix with orthonormal rows (Haar-distributed).
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    pub q: Array2<f64>,
    pub k: usize,
}

/// Random first-layer weights for the random-feature embedding: a `D x d`
/// matrix with i.i.d. `N(0, 1/d)` entries (standard deviation `1/sqrt(d)`).
#[derive(Debug, Clone)]
pub struct FeatureWeights {
    pub w: Array2<f64>,
    pub d: usize,
    pub feature_count: usize,
}

/// Ground-truth coefficients: entries uniform on (0, 1), rescaled to unit
/// Euclidean norm. Both of the generating conventions (uniform entries, unit
/// norm) are only jointly satisfiable via the rescaling.
pub fn sample_beta_star(p: usize, seed: u64) -> Result<Array1<f64>> {
    if p == 0 {
        return Err(Error::InvalidDimension(
            "beta_star dimension must be positive".into(),
        ));
    }
    let mut rng = rng_from(seed);
    let unif = Uniform::new(0.0f64, 1.0).expect("valid range");
    let mut v = Array1::from_shape_fn(p, |_| unif.sample(&mut rng));
    let norm = v.dot(&v).sqrt();
    v.mapv_inplace(|x| x / norm);
    Ok(v)
}

/// Draw `X` with i.i.d. standard Gaussian entries (row-major fill order) and
/// set `y = X beta_star + eps`, `eps ~ N(0, sigma2 I)`.
pub fn generate_dataset(
    n: usize,
    p: usize,
    beta_star: &Array1<f64>,
    sigma2: f64,
    seed: u64,
) -> Result<RegressionDataset> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidDimension(format!(
            "dataset dimensions must be positive, got n={n}, p={p}"
        )));
    }
    if beta_star.len() != p {
        return Err(Error::InvalidDimension(format!(
            "beta_star has {} entries, expected p={p}",
            beta_star.len()
        )));
    }
    if sigma2 < 0.0 {
        return Err(Error::Domain(format!(
            "sigma2 must be nonnegative, got {sigma2}"
        )));
    }
    let mut rng = rng_from(seed);
    let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
    let sd = sigma2.sqrt();
    let mut y = x.dot(beta_star);
    for yi in y.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *yi += sd * z;
    }
    RegressionDataset::new(x, y, beta_star.clone(), sigma2)
}

/// First `k` rows of the orthogonal factor of a `p x p` Gaussian matrix
/// (sign-fixed QR), i.e. Haar-distributed orthonormal rows.
pub fn sample_projection(k: usize, p: usize, seed: u64) -> Result<ProjectionPair> {
    if k == 0 || k > p {
        return Err(Error::InvalidDimension(format!(
            "projection needs 1 <= k <= p, got k={k}, p={p}"
        )));
    }
    let mut rng = rng_from(seed);
    let g = Array2::from_shape_fn((p, k), |_| StandardNormal.sample(&mut rng));
    let q_cols = crate::linalg::thin_q_haar(&g.view())?;
    let q = Array2::from_shape_fn((k, p), |(i, j)| q_cols[[j, i]]);
    Ok(ProjectionPair { q, k })
}

/// `D x d` first-layer weights, entries i.i.d. `N(0, 1/d)`.
pub fn sample_feature_weights(feature_count: usize, d: usize, seed: u64) -> Result<FeatureWeights> {
    if feature_count == 0 || d == 0 {
        return Err(Error::InvalidDimension(format!(
            "feature weights need positive dimensions, got D={feature_count}, d={d}"
        )));
    }
    let sd = 1.0 / (d as f64).sqrt();
    let mut rng = rng_from(seed);
    let w = Array2::from_shape_fn((feature_count, d), |_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        sd * z
    });
    Ok(FeatureWeights {
        w,
        d,
        feature_count,
    })
}

const IDX_MAGIC_IMAGES: u32 = 0x0000_0803;
const IDX_MAGIC_LABELS: u32 = 0x0000_0801;

fn read_be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Length(format!(
            "file truncated reading {what}: need {end} bytes, have {}",
            bytes.len()
        )));
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Load an IDX image/label file pair (the Fashion-MNIST container format).
///
/// Pixels `u` in `[0, 255]` are mapped to `2u/255 - 1` and flattened
/// row-major, giving an `n x d` matrix over `[-1, 1]`; labels come back as
/// raw bytes. The two files are cross-checked for consistent counts.
pub fn load_idx(path_images: &Path, path_labels: &Path) -> Result<(Array2<f64>, Vec<u8>)> {
    let img = fs::read(path_images)?;
    let lab = fs::read(path_labels)?;

    let magic = read_be_u32(&img, 0, "image magic")?;
    if magic != IDX_MAGIC_IMAGES {
        return Err(Error::Format {
            offset: 0,
            reason: format!(
                "bad image magic {magic:#010x}, expected {IDX_MAGIC_IMAGES:#010x} (3-D u8 tensor)"
            ),
        });
    }
    let n = read_be_u32(&img, 4, "image count")? as usize;
    let rows = read_be_u32(&img, 8, "image rows")? as usize;
    let cols = read_be_u32(&img, 12, "image cols")? as usize;
    let d = rows * cols;
    let need = 16 + n * d;
    if img.len() != need {
        return Err(Error::Length(format!(
            "image payload has {} bytes, header implies {need}",
            img.len()
        )));
    }

    let magic_l = read_be_u32(&lab, 0, "label magic")?;
    if magic_l != IDX_MAGIC_LABELS {
        return Err(Error::Format {
            offset: 0,
            reason: format!(
                "bad label magic {magic_l:#010x}, expected {IDX_MAGIC_LABELS:#010x} (1-D u8 tensor)"
            ),
        });
    }
    let n_lab = read_be_u32(&lab, 4, "label count")? as usize;
    if lab.len() != 8 + n_lab {
        return Err(Error::Length(format!(
            "label payload has {} bytes, header implies {}",
            lab.len(),
            8 + n_lab
        )));
    }
    if n_lab != n {
        return Err(Error::Consistency(format!(
            "image file holds {n} items but label file holds {n_lab}"
        )));
    }

    let x = Array2::from_shape_fn((n, d), |(i, j)| {
        let u = img[16 + i * d + j] as f64;
        2.0 * u / 255.0 - 1.0
    });
    Ok((x, lab[8..].to_vec()))
}

/// Write an image tensor (`n x rows x cols`, row-major, u8) and a label
/// vector in IDX form. Used for round-trip checks and fixture generation.
pub fn write_idx(
    path_images: &Path,
    path_labels: &Path,
    pixels: &[u8],
    n: usize,
    rows: usize,
    cols: usize,
    labels: &[u8],
) -> Result<()> {
    if pixels.len() != n * rows * cols {
        return Err(Error::InvalidDimension(format!(
            "pixel buffer has {} bytes, expected {}",
            pixels.len(),
            n * rows * cols
        )));
    }
    if labels.len() != n {
        return Err(Error::Consistency(format!(
            "label buffer has {} entries, expected {n}",
            labels.len()
        )));
    }
    let mut img = Vec::with_capacity(16 + pixels.len());
    img.extend_from_slice(&IDX_MAGIC_IMAGES.to_be_bytes());
    img.extend_from_slice(&(n as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    img.extend_from_slice(pixels);
    fs::write(path_images, img)?;

    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&IDX_MAGIC_LABELS.to_be_bytes());
    lab.extend_from_slice(&(n as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    fs::write(path_labels, lab)?;
    Ok(())
}

/// Max-norm check that `Q Q^T = I_k`, used by tests and validation.
pub fn orthonormality_defect(q: &ArrayView2<f64>) -> f64 {
    let k = q.nrows();
    let qqt = q.dot(&q.t());
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((qqt[[i, j]] - want).abs());
        }
    }
    worst
}
