//! Point assembly for plank systems.
//!
//! A plank system is a unit-diagonal matrix `A` with midpoints `m` and
//! half-widths `w`; a solution is a coefficient vector `lambda` with
//! `|(A lambda)_i - m_i| >= w_i` for every row and a small norm.
//!
//! The equal-width pipeline: symmetrize `A` into `H = diag(theta) A U`, pick
//! signs for `(H, theta, mu = theta m / h)` and map back through `U`:
//! `lambda = h U (eps * theta)`. Every margin is then at least `h`, and
//! `|lambda|_2^2 = h^2 |theta|^2 <= n h^2` because `theta_i = (H Uᵀ)_ii`.
//!
//! Unequal widths are reduced to equal ones by cutting plank `i` into
//! `k_i = floor(w_i N) + 1` overlapping sheets of half-width `1 / N`.

use crate::bang::{bang_search, BangInstance, BangOptions};
use crate::error::{Error, Result};
use crate::geometry::Body;
use crate::matrix::Matrix;
use crate::symmetrize::{symmetrize, symmetrize_weighted, ScalingConfig, SymmetrizationResult};

/// Slack on every guaranteed margin and norm bound.
pub const CONTRACT_SLACK: f64 = 1e-9;
/// Slack on the `sum theta^2 <= n` certificate.
pub const THETA_SLACK: f64 = 1e-8;
/// Accepted deviation of `a_ii` from 1.
pub const UNIT_DIAGONAL_TOL: f64 = 1e-10;
/// Accepted excess of `sum w` over 1.
pub const WIDTH_SUM_TOL: f64 = 1e-12;
/// Doublings tried by automatic sheet resolution when sheets do not fit.
const AUTO_RESOLUTION_RETRIES: usize = 3;
/// Largest replicated system the sign search is run on; it is dense.
pub const MAX_SHEETS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct PlankSystem {
    a: Matrix,
    m: Vec<f64>,
    w: Vec<f64>,
}

impl PlankSystem {
    pub fn new(a: Matrix, m: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() || m.len() != n || w.len() != n {
            return Err(Error::InvalidDimension(format!(
                "A is {}x{}, m has {}, w has {}",
                a.rows(),
                a.cols(),
                m.len(),
                w.len()
            )));
        }
        check_unit_diagonal(&a)?;
        if let Some(i) = m.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSystem(format!("m[{i}] is not finite")));
        }
        if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidSystem(format!("w[{i}] = {} is not positive", w[i])));
        }
        let sum: f64 = w.iter().sum();
        if sum > 1.0 + WIDTH_SUM_TOL {
            return Err(Error::InvalidSystem(format!("half-widths sum to {sum} > 1")));
        }
        Ok(Self { a, m, w })
    }

    /// The equal-width system `w_i = 1/n`.
    pub fn equal_width(a: Matrix, m: Vec<f64>) -> Result<Self> {
        let n = a.rows();
        Self::new(a, m, vec![1.0 / n as f64; n])
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn width_sum(&self) -> f64 {
        self.w.iter().sum()
    }

    /// True when every width is the same and at most `1/n`.
    pub fn is_equal_width(&self) -> bool {
        let n = self.len() as f64;
        let w0 = self.w[0];
        self.w.iter().all(|w| (w - w0).abs() <= 1e-12) && w0 <= (1.0 + 1e-12) / n
    }
}

fn check_unit_diagonal(a: &Matrix) -> Result<()> {
    if let Some(i) = (0..a.rows()).find(|&i| (a[(i, i)] - 1.0).abs() > UNIT_DIAGONAL_TOL) {
        return Err(Error::InvalidSystem(format!("diagonal entry {i} is {}, expected 1", a[(i, i)])));
    }
    Ok(())
}

/// Which norm bound a solution carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certificate {
    /// `sum lambda^2 <= 1/n`.
    EqualWidth,
    /// `sum |lambda| <= 1`, from sheets at resolution `N`.
    Replicated(usize),
    /// `sum |lambda| <= 1`, checked after the fact.
    DirectWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Replicate,
    DirectWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SheetResolution {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverOptions {
    pub scaling: ScalingConfig,
    pub bang: BangOptions,
}

impl SolverOptions {
    pub fn with_max_flips(mut self, max_flips: usize) -> Self {
        self.bang.max_flips = max_flips;
        self
    }
}

/// Counters from the pipeline run that produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub flips: usize,
    pub theta_sq_sum: f64,
    /// Number of equal-width rows the sign search ran on.
    pub system_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub lambda: Vec<f64>,
    /// `|(A lambda)_i - m_i|`
    pub margins: Vec<f64>,
    pub l1_norm: f64,
    pub l2sq_norm: f64,
    /// `sum lambda_j^2 / w_j`
    pub weighted_norm: f64,
    pub certificate: Certificate,
    pub stats: SolveStats,
}

impl Solution {
    fn assemble(sys: &PlankSystem, lambda: Vec<f64>, certificate: Certificate, stats: SolveStats) -> Result<Self> {
        let image = sys.a.mul_vec(&lambda)?;
        let margins = image.iter().zip(&sys.m).map(|(y, m)| (y - m).abs()).collect();
        let l1_norm = lambda.iter().map(|l| l.abs()).sum();
        let l2sq_norm = lambda.iter().map(|l| l * l).sum();
        let weighted_norm = lambda.iter().zip(&sys.w).map(|(l, w)| l * l / w).sum();
        Ok(Self { lambda, margins, l1_norm, l2sq_norm, weighted_norm, certificate, stats })
    }

    pub fn min_margin_slack(&self, w: &[f64]) -> f64 {
        self.margins.iter().zip(w).map(|(m, w)| m - w).fold(f64::INFINITY, f64::min)
    }

    fn post_check(&self, sys: &PlankSystem) -> Result<()> {
        if let Some(i) = (0..sys.len()).find(|&i| self.margins[i] < sys.w[i] - CONTRACT_SLACK) {
            return Err(Error::CertificateViolation(format!("margin {i} is {} < {}", self.margins[i], sys.w[i])));
        }
        match self.certificate {
            Certificate::EqualWidth => {
                let bound = 1.0 / sys.len() as f64;
                if self.l2sq_norm > bound + CONTRACT_SLACK {
                    return Err(Error::CertificateViolation(format!("sum lambda^2 = {} > {bound}", self.l2sq_norm)));
                }
            }
            Certificate::Replicated(_) | Certificate::DirectWeighted => {
                if self.l1_norm > 1.0 + CONTRACT_SLACK {
                    return Err(Error::CertificateViolation(format!("sum |lambda| = {} > 1", self.l1_norm)));
                }
            }
        }
        Ok(())
    }
}

fn check_theta(sym: &SymmetrizationResult, weight_total: f64) -> Result<f64> {
    let sq: f64 = sym.theta.iter().map(|t| t * t).sum();
    if sq > weight_total + THETA_SLACK {
        return Err(Error::CertificateViolation(format!("sum theta^2 = {sq} exceeds {weight_total}")));
    }
    Ok(sq)
}

/// Equal-width core: margins at least `half_width`, with
/// `sum lambda^2 <= n half_width^2`.
fn solve_uniform(a: &Matrix, m: &[f64], half_width: f64, opts: &SolverOptions) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.rows();
    let sym = symmetrize(a, &opts.scaling)?;
    let theta_sq_sum = check_theta(&sym, n as f64)?;
    let mu: Vec<f64> = sym.theta.iter().zip(m).map(|(t, m)| t * m / half_width).collect();
    let inst = BangInstance::new(sym.h.clone(), sym.theta.clone(), mu)?;
    let run = bang_search(&inst, &opts.bang)?;
    let signed: Vec<f64> = (0..n).map(|j| run.signs.get(j) * sym.theta[j] * half_width).collect();
    let lambda = sym.u.mul_vec(&signed)?;
    let stats = SolveStats { iterations: sym.iterations, flips: run.flips, theta_sq_sum, system_size: n };
    Ok((lambda, stats))
}

/// Equal half-widths `1/n`: margins at least `1/n` and `sum lambda^2 <= 1/n`.
pub fn solve_equal_width(a: &Matrix, m: &[f64], opts: &SolverOptions) -> Result<Solution> {
    let sys = PlankSystem::equal_width(a.clone(), m.to_vec())?;
    let n = sys.len();
    let (lambda, stats) = solve_uniform(&sys.a, &sys.m, 1.0 / n as f64, opts)?;
    let sol = Solution::assemble(&sys, lambda, Certificate::EqualWidth, stats)?;
    sol.post_check(&sys)?;
    Ok(sol)
}

/// Sheets covering each plank: `counts[i]` midpoints for plank `i`, each with
/// open half-width `half_width = 1 / resolution`.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetPlan {
    pub resolution: usize,
    pub counts: Vec<usize>,
    pub midpoints: Vec<Vec<f64>>,
}

impl SheetPlan {
    pub fn half_width(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Cuts every plank into `floor(w_i N) + 1` sheets with midpoints evenly
/// spaced over `[m_i - w_i + 1/N, m_i + w_i - 1/N]`. Adjacent midpoints are
/// less than `2/N` apart, so the open sheets cover the open plank.
pub fn plan_sheets(sys: &PlankSystem, resolution: usize) -> Result<SheetPlan> {
    if resolution == 0 {
        return Err(Error::InvalidSystem("sheet resolution must be positive".into()));
    }
    let nf = resolution as f64;
    let h = 1.0 / nf;
    let counts: Vec<usize> = sys.w.iter().map(|w| (w * nf).floor() as usize + 1).collect();
    let sheets: usize = counts.iter().sum();
    if sheets > MAX_SHEETS {
        return Err(Error::TooLarge(format!("{sheets} sheets at resolution {resolution}, limit {MAX_SHEETS}")));
    }
    if sheets > resolution {
        return Err(Error::ResolutionTooCoarse { resolution, sheets });
    }
    let midpoints = counts
        .iter()
        .zip(sys.m.iter().zip(&sys.w))
        .map(|(&k, (&m, &w))| {
            if k == 1 {
                return vec![m];
            }
            let lo = m - w + h;
            let step = 2.0 * (w - h) / (k - 1) as f64;
            (0..k).map(|t| lo + step * t as f64).collect()
        })
        .collect();
    Ok(SheetPlan { resolution, counts, midpoints })
}

/// Smallest resolution the automatic mode starts from: `ceil(2n / slack)`.
pub fn auto_resolution(sys: &PlankSystem) -> Result<usize> {
    let slack = 1.0 - sys.width_sum();
    if slack <= 0.0 {
        return Err(insufficient_slack(sys));
    }
    Ok((2.0 * sys.len() as f64 / slack).ceil() as usize)
}

fn insufficient_slack(sys: &PlankSystem) -> Error {
    let sum = sys.width_sum();
    Error::InsufficientSlack { sum, suggested: (1.0 - 1e-6) / sum }
}

fn resolve_plan(sys: &PlankSystem, resolution: SheetResolution) -> Result<SheetPlan> {
    match resolution {
        SheetResolution::Fixed(n) => plan_sheets(sys, n),
        SheetResolution::Auto => {
            let mut n = auto_resolution(sys)?;
            let mut tries = 0;
            loop {
                match plan_sheets(sys, n) {
                    Err(Error::ResolutionTooCoarse { .. }) if tries < AUTO_RESOLUTION_RETRIES => {
                        n *= 2;
                        tries += 1;
                    }
                    other => return other,
                }
            }
        }
    }
}

/// The replicated system, materialized: row and column `(i, t)` copy row and
/// column `i` of `A`, the midpoint of row `(i, t)` is sheet `t` of plank `i`.
pub fn replicate_system(sys: &PlankSystem, plan: &SheetPlan) -> (Matrix, Vec<f64>) {
    let owner: Vec<usize> = plan.counts.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i, k)).collect();
    let a = Matrix::from_fn(owner.len(), owner.len(), |r, c| sys.a[(owner[r], owner[c])]);
    let mids = plan.midpoints.iter().flatten().copied().collect();
    (a, mids)
}

/// `lambda'_j = sum_t lambda_(j, t)`.
pub fn fold_sheets(plan: &SheetPlan, lambda: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(plan.counts.len());
    let mut at = 0;
    for &k in &plan.counts {
        out.push(lambda[at..at + k].iter().sum());
        at += k;
    }
    out
}

/// Replicated solve through the materialized `K x K` system.
pub fn solve_replicated_explicit(sys: &PlankSystem, plan: &SheetPlan, opts: &SolverOptions) -> Result<Solution> {
    let (big, mids) = replicate_system(sys, plan);
    let (lambda, stats) = solve_uniform(&big, &mids, plan.half_width(), opts)?;
    let folded = fold_sheets(plan, &lambda);
    let sol = Solution::assemble(sys, folded, Certificate::Replicated(plan.resolution), stats)?;
    sol.post_check(sys)?;
    Ok(sol)
}

/// Replicated solve without materializing the scaling problem.
///
/// The replicated matrix is `P A Pᵀ` with `P` the `K x n` sheet indicator.
/// Writing `P = Q D^{1/2}` (`Q` orthonormal columns, `D = diag(k)`), the
/// scaling iteration started from `theta = 1` keeps `theta` constant on
/// sheets, and `diag(theta) P A Pᵀ = Q (diag(alpha) D^{1/2} A D^{1/2}) Qᵀ`.
/// So the `n x n` weighted problem gives `H_s`, `U_s`, and
/// `H = Q H_s Qᵀ`, `U = Q U_s Qᵀ + (I - Q Qᵀ)` for the big system. Only the
/// sign search runs at size `K`, and the folded coefficients are
/// `lambda'_i = h sqrt(k_i) sum_j (U_s)_ij alpha_j s_j / sqrt(k_j)` where
/// `s_j` is the sum of the signs on plank `j`.
pub fn solve_replicated(sys: &PlankSystem, plan: &SheetPlan, opts: &SolverOptions) -> Result<Solution> {
    let n = sys.len();
    let k: Vec<f64> = plan.counts.iter().map(|&c| c as f64).collect();
    let sk: Vec<f64> = k.iter().map(|v| v.sqrt()).collect();
    let total = plan.total();
    let b = Matrix::from_fn(n, n, |i, j| sk[i] * sys.a[(i, j)] * sk[j]);
    let sym = symmetrize_weighted(&b, &k, &opts.scaling)?;
    let alpha = &sym.theta;
    let theta_sq_sum: f64 = alpha.iter().zip(&k).map(|(a, k)| k * a * a).sum();
    if theta_sq_sum > total as f64 + THETA_SLACK {
        return Err(Error::CertificateViolation(format!("sum theta^2 = {theta_sq_sum} exceeds {total}")));
    }

    let owner: Vec<usize> = plan.counts.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(i, c)).collect();
    let h = plan.half_width();
    let big_h = Matrix::from_fn(total, total, |r, c| {
        let (i, j) = (owner[r], owner[c]);
        if r == c {
            1.0
        } else {
            sym.h[(i, j)] / (sk[i] * sk[j])
        }
    });
    let theta_big: Vec<f64> = owner.iter().map(|&i| alpha[i]).collect();
    let mids: Vec<f64> = plan.midpoints.iter().flatten().copied().collect();
    let mu: Vec<f64> = owner.iter().zip(&mids).map(|(&i, c)| alpha[i] * c / h).collect();
    let inst = BangInstance::new(big_h, theta_big, mu)?;
    let run = bang_search(&inst, &opts.bang)?;

    let mut sign_sums = vec![0.0; n];
    for (r, &i) in owner.iter().enumerate() {
        sign_sums[i] += run.signs.get(r);
    }
    let v: Vec<f64> = (0..n).map(|j| alpha[j] * sign_sums[j] / sk[j]).collect();
    let lambda: Vec<f64> = sym.u.mul_vec(&v)?.iter().zip(&sk).map(|(x, s)| h * s * x).collect();

    let stats = SolveStats { iterations: sym.iterations, flips: run.flips, theta_sq_sum, system_size: total };
    let sol = Solution::assemble(sys, lambda, Certificate::Replicated(plan.resolution), stats)?;
    sol.post_check(sys)?;
    Ok(sol)
}

/// Unequal half-widths with `sum w < 1`.
pub fn solve_general(
    sys: &PlankSystem,
    strategy: Strategy,
    resolution: SheetResolution,
    opts: &SolverOptions,
) -> Result<Solution> {
    if sys.width_sum() >= 1.0 {
        return Err(insufficient_slack(sys));
    }
    match strategy {
        Strategy::Replicate => {
            let plan = resolve_plan(sys, resolution)?;
            solve_replicated(sys, &plan, opts)
        }
        Strategy::DirectWeighted => match solve_direct_weighted(sys, opts) {
            Ok(sol) => Ok(sol),
            Err(Error::CertificateViolation(_)) => {
                let plan = resolve_plan(sys, resolution)?;
                solve_replicated(sys, &plan, opts)
            }
            Err(e) => Err(e),
        },
    }
}

/// Single `n`-sized pass with `theta'_j = theta_j w_j`: margins are
/// guaranteed, the `l1` bound is only checked afterwards.
fn solve_direct_weighted(sys: &PlankSystem, opts: &SolverOptions) -> Result<Solution> {
    let n = sys.len();
    let sym = symmetrize(&sys.a, &opts.scaling)?;
    let theta_sq_sum = check_theta(&sym, n as f64)?;
    let weighted: Vec<f64> = sym.theta.iter().zip(&sys.w).map(|(t, w)| t * w).collect();
    let mu: Vec<f64> = sym.theta.iter().zip(&sys.m).map(|(t, m)| t * m).collect();
    let inst = BangInstance::new(sym.h.clone(), weighted.clone(), mu)?;
    let run = bang_search(&inst, &opts.bang)?;
    let signed: Vec<f64> = (0..n).map(|j| run.signs.get(j) * weighted[j]).collect();
    let lambda = sym.u.mul_vec(&signed)?;
    let stats = SolveStats { iterations: sym.iterations, flips: run.flips, theta_sq_sum, system_size: n };
    let sol = Solution::assemble(sys, lambda, Certificate::DirectWeighted, stats)?;
    sol.post_check(sys)?;
    Ok(sol)
}

/// A functional of dual norm at most one with prescribed values kept away
/// from `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// Coefficients of `phi` in the standard basis.
    pub functional: Vec<f64>,
    /// `phi = sum_j lambda_j psi_j`
    pub lambda: Vec<f64>,
    /// `psi_j`, the norming functional of `x_j`.
    pub norming: Vec<Vec<f64>>,
    /// `|phi(x_i) - m_i|`
    pub margins: Vec<f64>,
    pub dual_norm: f64,
    pub solution: Solution,
}

/// Given unit vectors `x_i` of `body`, find `phi` with `||phi||_* <= 1` and
/// `|phi(x_i) - m_i| >= w_i`.
///
/// Builds `a_ij = psi_j(x_i)` from the norming functionals `psi_j` (unit
/// diagonal since `psi_i(x_i) = 1`), solves the plank system and returns
/// `phi = sum_j lambda_j psi_j`.
pub fn solve_dual(
    body: &Body,
    points: &[Vec<f64>],
    m: &[f64],
    w: &[f64],
    strategy: Strategy,
    resolution: SheetResolution,
    opts: &SolverOptions,
) -> Result<DualSolution> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidSystem("at least one point is required".into()));
    }
    let norming: Vec<Vec<f64>> = points.iter().map(|x| body.norming_functional(x)).collect::<Result<_>>()?;
    let mut a = Matrix::from_fn(n, n, |i, j| norming[j].iter().zip(&points[i]).map(|(p, x)| p * x).sum());
    for i in 0..n {
        a[(i, i)] = 1.0;
    }
    let sys = PlankSystem::new(a, m.to_vec(), w.to_vec())?;
    let solution = solve_general(&sys, strategy, resolution, opts)?;
    let mut functional = vec![0.0; body.dim()];
    for (l, psi) in solution.lambda.iter().zip(&norming) {
        for (f, p) in functional.iter_mut().zip(psi) {
            *f += l * p;
        }
    }
    let margins = points
        .iter()
        .zip(m)
        .map(|(x, mi)| (functional.iter().zip(x).map(|(f, x)| f * x).sum::<f64>() - mi).abs())
        .collect();
    let dual_norm = body.dual_norm(&functional)?;
    Ok(DualSolution { functional, lambda: solution.lambda.clone(), norming, margins, dual_norm, solution })
}
