//! Dense linear-algebra kernel: SVD, symmetric eigendecomposition, nuclear
//! norm, polar decomposition and PSD square roots.
//!
//! Factorizations are delegated to `faer`; this module fixes the sign
//! conventions and tolerances the rest of the crate relies on. All tolerances
//! are absolute, every matrix that flows through the pipeline has unit-scale
//! diagonal.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Largest accepted `max |W S Vᵀ - M|`, relative to `max |M|`.
const SVD_RECONSTRUCTION_TOL: f64 = 1e-10;

/// Eigenvalues in `[-PSD_CLAMP, 0)` are treated as round-off and clamped.
pub const PSD_CLAMP: f64 = 1e-10;
/// Eigenvalues below `-PSD_REJECT` mean the input is genuinely indefinite.
pub const PSD_REJECT: f64 = 1e-8;
/// Accepted asymmetry for inputs that claim to be symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Thin SVD `M = W diag(sigma) Vᵀ` with singular values in descending order
/// and the first nonzero component of every left singular vector positive.
#[derive(Debug, Clone)]
pub struct Svd {
    pub left: Matrix,
    pub singular_values: Vec<f64>,
    pub right_t: Matrix,
}

fn check_square_finite(m: &Matrix, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidMatrix(format!("{what} needs a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    if !m.is_finite() {
        return Err(Error::InvalidMatrix(format!("{what}: non-finite entries")));
    }
    Ok(())
}

struct RawSvd {
    u: Matrix,
    sv: Vec<f64>,
    v_t: Matrix,
}

fn raw_svd(m: &Matrix) -> Option<RawSvd> {
    let dec = m.to_faer().svd().ok()?;
    let v = dec.V();
    Some(RawSvd {
        u: Matrix::from_faer(dec.U()),
        sv: dec.S().column_vector().iter().copied().collect(),
        v_t: Matrix::from_fn(v.ncols(), v.nrows(), |i, j| v[(j, i)]),
    })
}

fn reconstruction_error(m: &Matrix, d: &RawSvd) -> f64 {
    let scaled = Matrix::from_fn(d.u.rows(), d.sv.len(), |i, j| d.u[(i, j)] * d.sv[j]);
    scaled.matmul(&d.v_t).map_or(f64::INFINITY, |r| r.max_abs_diff(m))
}

/// Every factorization is checked against `M` before use; the transpose is
/// tried before giving up.
fn checked_svd(m: &Matrix) -> Result<RawSvd> {
    let scale = m.as_slice().iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let limit = SVD_RECONSTRUCTION_TOL * scale;
    if let Some(dec) = raw_svd(m).filter(|d| reconstruction_error(m, d) <= limit) {
        return Ok(dec);
    }
    let t = m.transpose();
    if let Some(dec) = raw_svd(&t).filter(|d| reconstruction_error(&t, d) <= limit) {
        return Ok(RawSvd { u: dec.v_t.transpose(), sv: dec.sv, v_t: dec.u.transpose() });
    }
    Err(Error::InvalidMatrix("svd did not converge".into()))
}

pub fn svd(m: &Matrix) -> Result<Svd> {
    if !m.is_finite() {
        return Err(Error::InvalidMatrix("svd: non-finite entries".into()));
    }
    let RawSvd { u, sv, v_t } = checked_svd(m)?;

    let k = sv.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let mut left = Matrix::zeros(u.rows(), k);
    let mut right_t = Matrix::zeros(k, v_t.cols());
    let mut singular_values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let flip = (0..u.rows()).map(|i| u[(i, src)]).find(|v| v.abs() > f64::EPSILON).is_some_and(|v| v < 0.0);
        let s = if flip { -1.0 } else { 1.0 };
        for i in 0..u.rows() {
            left[(i, dst)] = s * u[(i, src)];
        }
        for j in 0..v_t.cols() {
            right_t[(dst, j)] = s * v_t[(src, j)];
        }
        singular_values.push(sv[src]);
    }
    Ok(Svd { left, singular_values, right_t })
}

/// Sum of singular values.
pub fn nuclear_norm(m: &Matrix) -> Result<f64> {
    check_square_finite(m, "nuclear_norm")?;
    Ok(svd(m)?.singular_values.iter().sum())
}

/// `M = psd_part * orthogonal_part`.
#[derive(Debug, Clone)]
pub struct PolarFactors {
    pub psd_part: Matrix,
    pub orthogonal_part: Matrix,
}

/// Left polar decomposition through the SVD `M = W S Vᵀ`: the PSD factor is
/// `W S Wᵀ`, the orthogonal factor `W Vᵀ`.
///
/// For singular `M` the SVD already completes `W` and `V` to full orthonormal
/// bases, pairing the null directions in index order, so `W Vᵀ` is still
/// orthogonal. Any completion works downstream; only existence is needed.
pub fn polar_decompose(m: &Matrix) -> Result<PolarFactors> {
    check_square_finite(m, "polar_decompose")?;
    let Svd { left, singular_values, right_t } = svd(m)?;
    let weighted = Matrix::from_fn(left.rows(), left.cols(), |i, j| left[(i, j)] * singular_values[j]);
    let psd_part = weighted.matmul(&left.transpose())?.symmetrized();
    let orthogonal_part = left.matmul(&right_t)?;
    Ok(PolarFactors { psd_part, orthogonal_part })
}

/// Eigenvalues (ascending) and matching eigenvectors as columns.
pub fn symmetric_eigen(h: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    check_square_finite(h, "symmetric_eigen")?;
    let asym = h.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let a = h.symmetrized();
    let limit = SVD_RECONSTRUCTION_TOL * a.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let dec = a
        .to_faer()
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::InvalidMatrix("eigendecomposition did not converge".into()))?;
    let raw: Vec<f64> = dec.S().column_vector().iter().copied().collect();
    let q = Matrix::from_faer(dec.U());
    let mut order: Vec<usize> = (0..h.rows()).collect();
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&k| raw[k]).collect();
    let vectors = Matrix::from_fn(h.rows(), h.rows(), |i, j| q[(i, order[j])]);
    let scaled = Matrix::from_fn(h.rows(), h.rows(), |i, j| vectors[(i, j)] * values[j]);
    if scaled.matmul(&vectors.transpose())?.max_abs_diff(&a) > limit {
        return Err(Error::InvalidMatrix("eigendecomposition did not converge".into()));
    }
    Ok((values, vectors))
}

pub fn min_eigenvalue(h: &Matrix) -> Result<f64> {
    Ok(symmetric_eigen(h)?.0[0])
}

/// The PSD square root `T` with `T T = H`.
pub fn psd_sqrt(h: &Matrix) -> Result<Matrix> {
    check_square_finite(h, "psd_sqrt")?;
    let asym = h.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotPsd(format!("asymmetry {asym:e}")));
    }
    let (values, vectors) = symmetric_eigen(h)?;
    if values[0] < -PSD_REJECT {
        return Err(Error::NotPsd(format!("eigenvalue {:e}", values[0])));
    }
    let roots: Vec<f64> = values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let n = h.rows();
    let scaled = Matrix::from_fn(n, n, |i, j| vectors[(i, j)] * roots[j]);
    Ok(scaled.matmul(&vectors.transpose())?.symmetrized())
}

/// Seeded `rows x cols` matrix of standard normal entries.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

/// Deterministic orthogonal matrix: the orthogonal polar factor of a seeded
/// Gaussian matrix.
pub fn random_orthogonal(n: usize, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::InvalidDimension("random_orthogonal needs n >= 1".into()));
    }
    Ok(polar_decompose(&gaussian_matrix(n, n, seed))?.orthogonal_part)
}
