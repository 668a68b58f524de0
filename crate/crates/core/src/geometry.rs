//! Symmetric convex bodies as norms, and the homothet construction.
//!
//! A body is an `l_p` ball or an invertible linear image of one. Its gauge is
//! the norm it induces, the dual norm measures functionals. Given `n`
//! hyperplanes, [`solve_corollary`] finds `x` with `x + C/(n+1)` inside `C` and
//! on one side of every hyperplane.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::solver::{solve_equal_width, SolveStats, SolverOptions};

/// Smallest `|det|` accepted for a linear image.
pub const MIN_DETERMINANT: f64 = 1e-12;
/// Accepted deviation of a dual norm from 1 before a functional counts as
/// unnormalized.
pub const NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum BodyKind {
    /// Unit ball of `l_p`, `p` in `[1, inf]`.
    LpBall { p: f64 },
    /// `map(base)`, with the inverse cached.
    LinearImage { base: Box<Body>, map: Matrix, inverse: Matrix },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    kind: BodyKind,
    dim: usize,
}

fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if p.is_infinite() || max == 0.0 {
        return max;
    }
    if p == 2.0 {
        return max * x.iter().map(|v| (v / max).powi(2)).sum::<f64>().sqrt();
    }
    max * x.iter().map(|v| (v.abs() / max).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Conjugate exponent: `1/p + 1/q = 1`.
pub fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sign_or_plus(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Point of the `l_p` unit sphere where the unit `l_q` functional `phi`
/// attains 1.
fn lp_norming_point(p: f64, phi: &[f64]) -> Vec<f64> {
    if p.is_infinite() {
        return phi.iter().map(|&v| sign_or_plus(v)).collect();
    }
    if p == 1.0 {
        let mut best = 0;
        for (k, v) in phi.iter().enumerate() {
            if v.abs() > phi[best].abs() {
                best = k;
            }
        }
        let mut x = vec![0.0; phi.len()];
        x[best] = sign_or_plus(phi[best]);
        return x;
    }
    let q = conjugate_exponent(p);
    phi.iter().map(|&v| v.signum() * v.abs().powf(q - 1.0)).collect()
}

impl Body {
    pub fn lp_ball(p: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidBody("dimension must be positive".into()));
        }
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidBody(format!("p = {p} is outside [1, inf]")));
        }
        Ok(Self { kind: BodyKind::LpBall { p }, dim })
    }

    /// The cube `[-1, 1]^dim`.
    pub fn cube(dim: usize) -> Result<Self> {
        Self::lp_ball(f64::INFINITY, dim)
    }

    pub fn linear_image(base: Body, map: Matrix) -> Result<Self> {
        if !map.is_square() || map.rows() != base.dim {
            return Err(Error::InvalidBody(format!(
                "map is {}x{}, base body has dimension {}",
                map.rows(),
                map.cols(),
                base.dim
            )));
        }
        let m = map.to_faer();
        let det = m.determinant();
        if det.is_nan() || det.abs() < MIN_DETERMINANT {
            return Err(Error::InvalidBody(format!("map is singular (det {det:e})")));
        }
        let inverse = Matrix::from_faer(faer::linalg::solvers::DenseSolveCore::inverse(&m.partial_piv_lu()).as_ref());
        if !inverse.is_finite() {
            return Err(Error::InvalidBody("map is not invertible".into()));
        }
        let dim = base.dim;
        Ok(Self { kind: BodyKind::LinearImage { base: Box::new(base), map, inverse }, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &BodyKind {
        &self.kind
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::InvalidDimension(format!(
                "vector of length {} for a body of dimension {}",
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Minkowski functional `||x||_C`.
    pub fn gauge(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        match &self.kind {
            BodyKind::LpBall { p } => Ok(lp_norm(x, *p)),
            BodyKind::LinearImage { base, inverse, .. } => base.gauge(&inverse.mul_vec(x)?),
        }
    }

    /// `sup { <phi, x> : x in C }`.
    pub fn dual_norm(&self, phi: &[f64]) -> Result<f64> {
        self.check_dim(phi)?;
        match &self.kind {
            BodyKind::LpBall { p } => Ok(lp_norm(phi, conjugate_exponent(*p))),
            BodyKind::LinearImage { base, map, .. } => base.dual_norm(&map.transpose().mul_vec(phi)?),
        }
    }

    /// A point `x` with `||x||_C = 1` and `<phi, x> = 1` for a functional of
    /// unit dual norm.
    ///
    /// Ties are broken deterministically: for the cross-polytope the first
    /// maximal coordinate wins, for the cube zero coordinates map to `+1`.
    pub fn norming_point(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let dual_norm = self.dual_norm(phi)?;
        if (dual_norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { norm: dual_norm });
        }
        let unit: Vec<f64> = phi.iter().map(|v| v / dual_norm).collect();
        match &self.kind {
            BodyKind::LpBall { p } => Ok(lp_norming_point(*p, &unit)),
            BodyKind::LinearImage { base, map, .. } => {
                let pulled = map.transpose().mul_vec(&unit)?;
                map.mul_vec(&base.norming_point(&pulled)?)
            }
        }
    }

    /// A functional `psi` of unit dual norm with `psi(x) = 1` for a point of
    /// unit gauge.
    pub fn norming_functional(&self, x: &[f64]) -> Result<Vec<f64>> {
        let norm = self.gauge(x)?;
        if norm == 0.0 {
            return Err(Error::NonNormable("the zero vector has no norming functional".into()));
        }
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { norm });
        }
        let unit: Vec<f64> = x.iter().map(|v| v / norm).collect();
        match &self.kind {
            // the dual ball of l_p is l_q, so its norming points are ours
            BodyKind::LpBall { p } => Ok(lp_norming_point(conjugate_exponent(*p), &unit)),
            BodyKind::LinearImage { base, inverse, .. } => {
                let psi = base.norming_functional(&inverse.mul_vec(&unit)?)?;
                inverse.transpose().mul_vec(&psi)
            }
        }
    }

    /// Axis-aligned box containing the body.
    pub fn bounding_box(&self) -> Result<Vec<(f64, f64)>> {
        Ok(match &self.kind {
            BodyKind::LpBall { .. } => vec![(-1.0, 1.0); self.dim],
            BodyKind::LinearImage { base, map, .. } => {
                let inner = base.bounding_box()?;
                (0..self.dim)
                    .map(|i| {
                        let r: f64 = (0..self.dim).map(|j| map[(i, j)].abs() * inner[j].1.max(-inner[j].0)).sum();
                        (-r, r)
                    })
                    .collect()
            }
        })
    }
}

/// `{x : <normal, x> = offset}`
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Hyperplane {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }
}

/// Hyperplane rescaled so its functional has unit dual norm.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedHyperplane {
    pub functional: Vec<f64>,
    pub level: f64,
    /// The dual norm the raw normal was divided by.
    pub scale: f64,
}

pub fn normalize_hyperplanes(body: &Body, hyperplanes: &[Hyperplane]) -> Result<Vec<NormalizedHyperplane>> {
    hyperplanes
        .iter()
        .enumerate()
        .map(|(index, hp)| {
            let euclid = hp.normal.iter().map(|v| v * v).sum::<f64>().sqrt();
            if euclid.is_nan() || euclid < 1e-12 {
                return Err(Error::NullNormal { index });
            }
            let scale = body.dual_norm(&hp.normal)?;
            Ok(NormalizedHyperplane {
                functional: hp.normal.iter().map(|v| v / scale).collect(),
                level: hp.offset / scale,
                scale,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomothetResult {
    pub center: Vec<f64>,
    pub ratio: f64,
    /// `|phi_i(x) - m_i|` in unit-functional scale.
    pub margins: Vec<f64>,
    /// Margins in the hyperplanes' own scale.
    pub raw_margins: Vec<f64>,
    pub body_norm_of_center: f64,
    pub lambda: Vec<f64>,
    pub stats: SolveStats,
}

/// Center `x` of a homothet `x + C/(n+1)` inside `C` whose interior misses
/// every hyperplane.
///
/// With unit functionals `phi_i`, norming points `x_j` and
/// `a_ij = phi_i(x_j)`, the equal-width solve for midpoints `m (n+1)/n` gives
/// `lambda` with `sum |lambda| <= 1` and margins `>= 1/n`; then
/// `x = n/(n+1) sum lambda_j x_j` has gauge at most `n/(n+1)` and margins at
/// least `1/(n+1)`.
pub fn solve_corollary(body: &Body, hyperplanes: &[Hyperplane], opts: &SolverOptions) -> Result<HomothetResult> {
    let n = hyperplanes.len();
    if n == 0 {
        return Err(Error::InvalidSystem("at least one hyperplane is required".into()));
    }
    for hp in hyperplanes {
        body.check_dim(&hp.normal)?;
    }
    let normalized = normalize_hyperplanes(body, hyperplanes)?;
    let points: Vec<Vec<f64>> = normalized.iter().map(|h| body.norming_point(&h.functional)).collect::<Result<_>>()?;
    let mut a = Matrix::from_fn(n, n, |i, j| dot(&normalized[i].functional, &points[j]));
    for i in 0..n {
        a[(i, i)] = 1.0;
    }
    let nf = n as f64;
    let stretch = (nf + 1.0) / nf;
    let mids: Vec<f64> = normalized.iter().map(|h| h.level * stretch).collect();
    let sol = solve_equal_width(&a, &mids, opts)?;

    let shrink = nf / (nf + 1.0);
    let mut center = vec![0.0; body.dim];
    for (l, x) in sol.lambda.iter().zip(&points) {
        for (c, xk) in center.iter_mut().zip(x) {
            *c += shrink * l * xk;
        }
    }
    let margins: Vec<f64> = normalized.iter().map(|h| (dot(&h.functional, &center) - h.level).abs()).collect();
    let raw_margins = margins.iter().zip(&normalized).map(|(m, h)| m * h.scale).collect();
    let body_norm_of_center = body.gauge(&center)?;
    Ok(HomothetResult {
        center,
        ratio: 1.0 / (nf + 1.0),
        margins,
        raw_margins,
        body_norm_of_center,
        lambda: sol.lambda,
        stats: sol.stats,
    })
}

/// `n` parallel hyperplanes `x_1 = -1 + 2k/(n+1)` in the cube `[-1, 1]^d`;
/// no homothet larger than `1/(n+1)` avoids them.
pub fn sharpness_instance(n: usize, d: usize) -> Result<(Body, Vec<Hyperplane>)> {
    if n == 0 {
        return Err(Error::InvalidSystem("need at least one hyperplane".into()));
    }
    let body = Body::cube(d)?;
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    let hps = (1..=n).map(|k| Hyperplane::new(e1.clone(), -1.0 + 2.0 * k as f64 / (n as f64 + 1.0))).collect();
    Ok((body, hps))
}

/// `(2^-n, 1/(n+1))`: the pigeonhole cube factor against the homothet ratio.
pub fn davenport_comparison(n: u32) -> (f64, f64) {
    (2f64.powf(-f64::from(n)), 1.0 / (f64::from(n) + 1.0))
}
