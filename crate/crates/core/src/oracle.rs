//! Independent verification.
//!
//! Nothing here reuses solver internals: margins and norms are recomputed
//! from the raw inputs with compensated summation, the sign oracle has its
//! own feasibility predicate, and the grid search knows only gauges and
//! hyperplanes.

use std::fmt;

use crate::bang::{BangInstance, SignVector};
use crate::error::{Error, Result};
use crate::geometry::{normalize_hyperplanes, Body, Hyperplane};
use crate::solver::{Certificate, PlankSystem, Solution};

/// Largest instance [`exhaustive_signs`] will enumerate.
pub const MAX_EXHAUSTIVE: usize = 20;
/// Largest grid [`grid_search_2d`] will scan per axis.
pub const MAX_GRID: usize = 4096;

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

fn compensated_dot(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// Margin of plank / hyperplane `i`.
    Margin(usize),
    L1Norm,
    L2SqNorm,
    Gauge,
    DualNorm,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Margin(i) => write!(f, "plank {i}"),
            Constraint::L1Norm => f.write_str("l1 norm"),
            Constraint::L2SqNorm => f.write_str("squared l2 norm"),
            Constraint::Gauge => f.write_str("gauge of center"),
            Constraint::DualNorm => f.write_str("dual norm"),
        }
    }
}

/// Slack of every norm the verifier looked at (`bound - value`, positive is
/// good). `None` when the quantity does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormSlacks {
    pub l1: Option<f64>,
    pub l2sq: Option<f64>,
    /// `sum w - sum lambda^2 / w`; reported, never enforced.
    pub weighted: Option<f64>,
    pub gauge: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub feasible: bool,
    /// `min_i (margin_i - required_i)`.
    pub worst_margin_slack: f64,
    pub norm_slacks: NormSlacks,
    pub failures: Vec<(Constraint, f64)>,
}

impl VerificationReport {
    fn build(margin_slacks: &[f64], norm_slacks: NormSlacks, enforced: &[(Constraint, f64)], tol: f64) -> Self {
        let mut failures: Vec<(Constraint, f64)> = margin_slacks
            .iter()
            .enumerate()
            .filter(|(_, s)| **s < -tol)
            .map(|(i, s)| (Constraint::Margin(i), -s))
            .collect();
        failures.extend(enforced.iter().filter(|(_, s)| *s < -tol).map(|(c, s)| (*c, -s)));
        let worst_margin_slack = margin_slacks.iter().copied().fold(f64::INFINITY, f64::min);
        Self { feasible: failures.is_empty(), worst_margin_slack, norm_slacks, failures }
    }

    /// Indices of violated planks.
    pub fn violated_planks(&self) -> Vec<usize> {
        self.failures
            .iter()
            .filter_map(|(c, _)| match c {
                Constraint::Margin(i) => Some(*i),
                _ => None,
            })
            .collect()
    }
}

/// Recomputes margins and norms for `lambda` and checks them against the
/// bound named by `certificate`.
pub fn check_lambda(
    sys: &PlankSystem,
    lambda: &[f64],
    certificate: Certificate,
    tol: f64,
) -> Result<VerificationReport> {
    let n = sys.len();
    if lambda.len() != n {
        return Err(Error::InvalidDimension(format!("{} coefficients for {n} planks", lambda.len())));
    }
    let a = sys.a();
    let margin_slacks: Vec<f64> =
        (0..n).map(|i| (compensated_dot(a.row(i), lambda) - sys.m()[i]).abs() - sys.w()[i]).collect();
    let l1 = compensated_sum(lambda.iter().map(|l| l.abs()));
    let l2sq = compensated_sum(lambda.iter().map(|l| l * l));
    let weighted = compensated_sum(lambda.iter().zip(sys.w()).map(|(l, w)| l * l / w));
    let slacks = NormSlacks {
        l1: Some(1.0 - l1),
        l2sq: Some(1.0 / n as f64 - l2sq),
        weighted: Some(sys.width_sum() - weighted),
        gauge: None,
    };
    let enforced = match certificate {
        Certificate::EqualWidth => vec![(Constraint::L2SqNorm, 1.0 / n as f64 - l2sq)],
        Certificate::Replicated(_) | Certificate::DirectWeighted => vec![(Constraint::L1Norm, 1.0 - l1)],
    };
    Ok(VerificationReport::build(&margin_slacks, slacks, &enforced, tol))
}

pub fn check_solution(sys: &PlankSystem, sol: &Solution, tol: f64) -> Result<VerificationReport> {
    check_lambda(sys, &sol.lambda, sol.certificate, tol)
}

/// Checks a homothet center: gauge at most `n/(n+1)` and every normalized
/// margin at least `1/(n+1)`.
pub fn check_homothet(body: &Body, hyperplanes: &[Hyperplane], center: &[f64], tol: f64) -> Result<VerificationReport> {
    let n = hyperplanes.len() as f64;
    let ratio = 1.0 / (n + 1.0);
    let normalized = normalize_hyperplanes(body, hyperplanes)?;
    if center.len() != body.dim() {
        return Err(Error::InvalidDimension(format!(
            "center has {} coordinates, body dimension is {}",
            center.len(),
            body.dim()
        )));
    }
    let margin_slacks: Vec<f64> =
        normalized.iter().map(|h| (compensated_dot(&h.functional, center) - h.level).abs() - ratio).collect();
    let gauge_slack = 1.0 - ratio - body.gauge(center)?;
    let slacks = NormSlacks { gauge: Some(gauge_slack), ..Default::default() };
    Ok(VerificationReport::build(&margin_slacks, slacks, &[(Constraint::Gauge, gauge_slack)], tol))
}

/// Checks a dual functional: `||phi||_* <= 1` and `|phi(x_i) - m_i| >= w_i`.
pub fn check_dual(
    body: &Body,
    points: &[Vec<f64>],
    m: &[f64],
    w: &[f64],
    functional: &[f64],
    tol: f64,
) -> Result<VerificationReport> {
    if points.len() != m.len() || m.len() != w.len() {
        return Err(Error::InvalidDimension("points, m and w differ in length".into()));
    }
    let margin_slacks: Vec<f64> = points
        .iter()
        .zip(m.iter().zip(w))
        .map(|(x, (mi, wi))| (compensated_dot(functional, x) - mi).abs() - wi)
        .collect();
    let dual_slack = 1.0 - body.dual_norm(functional)?;
    let slacks = NormSlacks { l1: Some(dual_slack), ..Default::default() };
    Ok(VerificationReport::build(&margin_slacks, slacks, &[(Constraint::DualNorm, dual_slack)], tol))
}

/// Row `i` of the margin condition, written out longhand.
fn row_meets_margin(inst: &BangInstance, signs: &[i8], i: usize) -> bool {
    let theta = &inst.theta;
    if theta[i] == 0.0 {
        return true;
    }
    let mut acc = Vec::with_capacity(signs.len());
    for (j, &s) in signs.iter().enumerate() {
        let term = inst.h[(i, j)] * theta[j];
        acc.push(if s > 0 { term } else { -term });
    }
    let value = compensated_sum(acc) - inst.mu[i];
    value.abs() >= theta[i] * (1.0 - 1e-12)
}

/// Whether every row of `inst` meets its margin under `signs`.
pub fn signs_feasible(inst: &BangInstance, signs: &SignVector) -> bool {
    (0..inst.len()).all(|i| row_meets_margin(inst, signs.as_slice(), i))
}

/// First feasible sign vector in lexicographic order (`+1` before `-1`), or
/// `None` when no vector works.
pub fn exhaustive_signs(inst: &BangInstance) -> Result<Option<SignVector>> {
    let n = inst.len();
    if n > MAX_EXHAUSTIVE {
        return Err(Error::TooLarge(format!("{n} signs exceed the limit of {MAX_EXHAUSTIVE}")));
    }
    Ok((0..1u64 << n).map(|mask| SignVector::from_mask(n, mask)).find(|s| signs_feasible(inst, s)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridHit {
    pub center: [f64; 2],
    /// Smallest normalized margin at this center.
    pub min_margin: f64,
    pub gauge: f64,
}

/// Scans cell centers of a `resolution x resolution` grid over the body's
/// bounding box for a homothet center of the given ratio. Both conditions are
/// relaxed by twice the cell diagonal; the hit with the largest minimum
/// margin wins, earliest cell on ties.
pub fn grid_search_2d(
    body: &Body,
    hyperplanes: &[Hyperplane],
    ratio: f64,
    resolution: usize,
) -> Result<Option<GridHit>> {
    if body.dim() != 2 {
        return Err(Error::TooLarge(format!("grid search needs d = 2, got {}", body.dim())));
    }
    if resolution == 0 || resolution > MAX_GRID {
        return Err(Error::TooLarge(format!("resolution {resolution} outside 1..={MAX_GRID}")));
    }
    let normalized = normalize_hyperplanes(body, hyperplanes)?;
    let bbox = body.bounding_box()?;
    let (x0, x1) = bbox[0];
    let (y0, y1) = bbox[1];
    let dx = (x1 - x0) / resolution as f64;
    let dy = (y1 - y0) / resolution as f64;
    let slack = 2.0 * dx.hypot(dy);

    let mut best: Option<GridHit> = None;
    for iy in 0..resolution {
        let y = y0 + (iy as f64 + 0.5) * dy;
        for ix in 0..resolution {
            let x = x0 + (ix as f64 + 0.5) * dx;
            let p = [x, y];
            let mut min_margin = f64::INFINITY;
            for h in &normalized {
                let v = (h.functional[0] * x + h.functional[1] * y - h.level).abs();
                min_margin = min_margin.min(v);
                if min_margin < ratio - slack {
                    break;
                }
            }
            if min_margin < ratio - slack {
                continue;
            }
            let gauge = body.gauge(&p)?;
            if gauge > 1.0 - ratio + slack {
                continue;
            }
            if best.as_ref().is_none_or(|b| min_margin > b.min_margin) {
                best = Some(GridHit { center: p, min_margin, gauge });
            }
        }
    }
    Ok(best)
}
