//! Diagonal-scaling symmetrization.
//!
//! Given a square `A` with non-null rows, find positive `theta` and an
//! orthogonal `U` such that `H = diag(theta) A U` is PSD with unit diagonal.
//! `H` is always the PSD polar factor of `diag(theta) A`; the scaling is the
//! minimizer of the nuclear norm of `diag(theta) A` over `prod theta = 1`.
//!
//! The minimizer is reached by the multiplicative update
//! `theta_i <- theta_i * g / sqrt(h_ii)`, `g` the geometric mean of
//! `sqrt(h_jj)`. One full step never increases the nuclear norm, and a fixed
//! point has constant diagonal.

use crate::error::{Error, Result};
use crate::kernel::{nuclear_norm, polar_decompose};
use crate::matrix::Matrix;

/// Rows with a 2-norm below this count as null.
pub const NULL_ROW_TOL: f64 = 1e-12;
/// Diagonal entries of `H` below this abort the iteration.
pub const DIAGONAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingConfig {
    /// Relative diagonal spread at which the iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Exponent applied to each update, in `(0, 1]`.
    pub damping: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000, damping: 1.0 }
    }
}

impl ScalingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidSystem(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidSystem("max_iter must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidSystem(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SymmetrizationResult {
    pub theta: Vec<f64>,
    /// Orthogonal, with `h_ij = theta_i (A U)_ij`.
    pub u: Matrix,
    pub h: Matrix,
    /// Number of scaling updates performed.
    pub iterations: usize,
    /// `max_i |h_ii - 1|` after the final rescale.
    pub residual: f64,
    /// `trace(H)` before the final rescale.
    pub nuclear_trace: f64,
    /// Nuclear norm of `diag(theta) A` at every visited iterate, starting
    /// from `theta = 1`.
    pub nuclear_history: Vec<f64>,
}

fn check_rows(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidMatrix(format!("symmetrize needs a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    for i in 0..a.rows() {
        let norm = a.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < NULL_ROW_TOL {
            return Err(Error::NullRow { row: i, norm });
        }
    }
    Ok(())
}

/// Scales `A` so that `diag(theta) A U` is PSD with unit diagonal.
pub fn symmetrize(a: &Matrix, config: &ScalingConfig) -> Result<SymmetrizationResult> {
    symmetrize_weighted(a, &vec![1.0; a.rows()], config)
}

/// Weighted variant: drives `h_ii / weight_i` to a common value and rescales
/// so that `h_ii = weight_i`.
///
/// With integer weights `k` and `a = D^{1/2} B D^{1/2}`, `D = diag(k)`, this is
/// the unweighted iteration on the system that repeats row and column `i` of
/// `B` `k_i` times, restricted to block-constant scalings (which that
/// iteration preserves).
pub(crate) fn symmetrize_weighted(a: &Matrix, weight: &[f64], config: &ScalingConfig) -> Result<SymmetrizationResult> {
    config.validate()?;
    check_rows(a)?;
    let n = a.rows();
    debug_assert_eq!(weight.len(), n);
    let total: f64 = weight.iter().sum();

    let mut theta = vec![1.0; n];
    let mut history = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut it = Iterate::at(a, weight, &theta)?;
    loop {
        history.push(it.trace);
        if best.as_ref().is_none_or(|(s, _)| it.spread < *s) {
            best = Some((it.spread, theta.clone()));
        }
        if it.spread <= config.tol {
            let mean = it.trace / total;
            return finish(weight, theta, it.orthogonal, it.h, mean, iterations, history);
        }
        if iterations >= config.max_iter {
            let (_, theta) = best.expect("at least one iterate");
            let polar = polar_decompose(&a.scale_rows(&theta))?;
            let h = polar.psd_part;
            let mean = h.trace() / total;
            let res = finish(weight, theta, polar.orthogonal_part, h, mean, iterations, history)?;
            return Err(Error::NoConvergence { best: Box::new(res) });
        }
        iterations += 1;

        let residual = it.log_residual(weight);
        for (t, r) in theta.iter_mut().zip(&residual) {
            *t *= (-r * config.damping).exp();
        }
        it = Iterate::at(a, weight, &theta)?;
    }
}

/// Polar factors and diagonal statistics at one `theta`.
struct Iterate {
    orthogonal: Matrix,
    h: Matrix,
    trace: f64,
    /// `h_ii / weight_i`
    diag: Vec<f64>,
    spread: f64,
}

impl Iterate {
    fn at(a: &Matrix, weight: &[f64], theta: &[f64]) -> Result<Self> {
        let polar = polar_decompose(&a.scale_rows(theta))?;
        let h = polar.psd_part;
        let trace = h.trace();
        let diag: Vec<f64> = h.diagonal().iter().zip(weight).map(|(d, w)| d / w).collect();
        if let Some((index, &value)) = diag.iter().enumerate().find(|(_, &d)| d < DIAGONAL_FLOOR) {
            return Err(Error::DegenerateDiagonal { index, value });
        }
        let mean = trace / weight.iter().sum::<f64>();
        let spread = diag.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max) / mean;
        Ok(Self { orthogonal: polar.orthogonal_part, h, trace, diag, spread })
    }

    /// `r_i = log sqrt(d_i) - log g`; the update is `log theta -= r`,
    /// and `sum w_i r_i = 0`.
    fn log_residual(&self, weight: &[f64]) -> Vec<f64> {
        let total: f64 = weight.iter().sum();
        let log_g = self.diag.iter().zip(weight).map(|(d, w)| w * 0.5 * d.ln()).sum::<f64>() / total;
        self.diag.iter().map(|d| 0.5 * d.ln() - log_g).collect()
    }
}

fn finish(
    weight: &[f64],
    theta: Vec<f64>,
    orthogonal: Matrix,
    h: Matrix,
    mean: f64,
    iterations: usize,
    nuclear_history: Vec<f64>,
) -> Result<SymmetrizationResult> {
    let nuclear_trace = h.trace();
    let theta: Vec<f64> = theta.iter().map(|t| t / mean).collect();
    let h = h.scaled(1.0 / mean);
    let residual = h.diagonal().iter().zip(weight).map(|(d, w)| (d / w - 1.0).abs()).fold(0.0, f64::max);
    Ok(SymmetrizationResult {
        theta,
        u: orthogonal.transpose(),
        h,
        iterations,
        residual,
        nuclear_trace,
        nuclear_history,
    })
}

fn check_bound_inputs(h: &Matrix) -> Result<()> {
    if !h.is_square() || !h.is_finite() {
        return Err(Error::InvalidMatrix("expected a finite square matrix".into()));
    }
    let asym = h.asymmetry();
    if asym > 1e-10 {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    if let Some((index, &value)) = h.diagonal().iter().enumerate().find(|(_, &d)| d < DIAGONAL_FLOOR) {
        return Err(Error::DegenerateDiagonal { index, value });
    }
    Ok(())
}

/// Both sides of `sum_i (HU)_ii^2 / h_ii <= sum_i h_ii` for PSD `H` and
/// orthogonal `U`.
pub fn diagonal_quotient_bound(h: &Matrix, u: &Matrix) -> Result<(f64, f64)> {
    check_bound_inputs(h)?;
    if u.rows() != h.rows() || !u.is_square() {
        return Err(Error::InvalidDimension(format!("U is {}x{}, H is {}x{}", u.rows(), u.cols(), h.rows(), h.cols())));
    }
    let residual = u.orthogonality_residual();
    if residual > 1e-8 {
        return Err(Error::InvalidOrthogonal { residual });
    }
    let hu = h.matmul(u)?;
    let lhs = (0..h.rows()).map(|i| hu[(i, i)].powi(2) / h[(i, i)]).sum();
    Ok((lhs, h.trace()))
}

/// Both sides of `||(h_ij / sqrt(h_ii))||_1 <= sqrt(n) ||H||_1^{1/2}` (nuclear
/// norms) for PSD `H`.
pub fn normalized_nuclear_bound(h: &Matrix) -> Result<(f64, f64)> {
    check_bound_inputs(h)?;
    let scale: Vec<f64> = h.diagonal().iter().map(|d| 1.0 / d.sqrt()).collect();
    let lhs = nuclear_norm(&h.scale_rows(&scale))?;
    let rhs = (h.rows() as f64).sqrt() * nuclear_norm(h)?.sqrt();
    Ok((lhs, rhs))
}
