use thiserror::Error;

use crate::bang::SignVector;
use crate::symmetrize::SymmetrizationResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything the solver pipeline can refuse or fail on.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("matrix is not positive semi-definite: {0}")]
    NotPsd(String),

    #[error("matrix is not orthogonal (residual {residual:e})")]
    InvalidOrthogonal { residual: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("row {row} is null (2-norm {norm:e})")]
    NullRow { row: usize, norm: f64 },

    #[error("diagonal entry {index} collapsed to {value:e}")]
    DegenerateDiagonal { index: usize, value: f64 },

    #[error("scaling iteration did not converge in {} iterations (residual {:e})", .best.iterations, .best.residual)]
    NoConvergence { best: Box<SymmetrizationResult> },

    #[error("sign search exceeded {flips} flips with {} violated rows", .violations.len())]
    FlipBudgetExceeded {
        flips: usize,
        best: SignVector,
        /// (row, deficit) pairs at the best iterate
        violations: Vec<(usize, f64)>,
    },

    #[error("certificate violated: {0}")]
    CertificateViolation(String),

    #[error("half-widths sum to {sum}, need a strictly positive slack below 1; shrink every width by a factor below {suggested:.6}")]
    InsufficientSlack { sum: f64, suggested: f64 },

    #[error("sheet resolution {resolution} too coarse: {sheets} sheets exceed it")]
    ResolutionTooCoarse { resolution: usize, sheets: usize },

    #[error("invalid plank system: {0}")]
    InvalidSystem(String),

    #[error("expected unit norm, got {norm}")]
    NotNormalized { norm: f64 },

    #[error("no norming functional available: {0}")]
    NonNormable(String),

    #[error("hyperplane {index} has a null normal")]
    NullNormal { index: usize },

    #[error("invalid body: {0}")]
    InvalidBody(String),

    #[error("instance too large for exhaustive oracle: {0}")]
    TooLarge(String),
}
