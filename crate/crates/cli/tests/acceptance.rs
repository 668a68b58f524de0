//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every quantity is recomputed here from the raw inputs with code that does
//! not share anything with the library beyond its public entry points: plain
//! loops for margins and norms, a cyclic Jacobi eigensolver, a one-sided
//! Jacobi SVD, Gaussian elimination and brute-force sign enumeration.

#![allow(clippy::needless_range_loop)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use plank::bang::{bang_search, bang_signs, BangInstance, BangOptions};
use plank::geometry::{sharpness_instance, solve_corollary, Body, Hyperplane};
use plank::kernel::{nuclear_norm, polar_decompose, random_orthogonal};
use plank::oracle::{exhaustive_signs, grid_search_2d};
use plank::solver::{
    solve_dual, solve_equal_width, solve_general, PlankSystem, SheetResolution, SolverOptions, Strategy,
};
use plank::symmetrize::{
    diagonal_quotient_bound, normalized_nuclear_bound, symmetrize, ScalingConfig, SymmetrizationResult,
};
use plank::{Error, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Rows = Vec<Vec<f64>>;
type Outcome = Result<String, String>;

// ---------------------------------------------------------------- oracles

fn rows_of(m: &Matrix) -> Rows {
    m.to_rows()
}

fn matmul(a: &Rows, b: &Rows) -> Rows {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n).map(|i| (0..m).map(|j| (0..k).map(|t| a[i][t] * b[t][j]).sum()).collect()).collect()
}

fn transpose(a: &Rows) -> Rows {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

fn max_abs_diff(a: &Rows, b: &Rows) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(a: &Rows) -> Vec<f64> {
    let n = a.len();
    let mut a = a.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let total: f64 = a.iter().flatten().map(|v| v * v).sum();
        if off <= 1e-30 * total.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Singular values by one-sided Jacobi on the columns.
fn singular_values(a: &Rows) -> Vec<f64> {
    let mut cols = transpose(a);
    let n = cols.len();
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..cols[p].len() {
                    let (x, y) = (cols[p][k], cols[q][k]);
                    cols[p][k] = c * x - s * y;
                    cols[q][k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    cols.iter().map(|c| dot(c, c).sqrt()).collect()
}

fn nuclear(a: &Rows) -> f64 {
    singular_values(a).iter().sum()
}

/// `x` with `a x = b`, partial pivoting.
fn solve_linear(a: &Rows, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Rows = a.iter().zip(b).map(|(r, &v)| r.iter().copied().chain([v]).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().fold(0.0, |a, v| a.max(v.abs()))
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// An lp ball, optionally mapped by `t`.
#[derive(Clone)]
struct Shape {
    p: f64,
    map: Option<Rows>,
}

impl Shape {
    fn gauge(&self, x: &[f64]) -> f64 {
        match &self.map {
            None => lp_norm(x, self.p),
            Some(t) => lp_norm(&solve_linear(t, x), self.p),
        }
    }

    fn dual(&self, phi: &[f64]) -> f64 {
        match &self.map {
            None => lp_norm(phi, conjugate(self.p)),
            Some(t) => {
                let tt = transpose(t);
                let pulled: Vec<f64> = tt.iter().map(|r| dot(r, phi)).collect();
                lp_norm(&pulled, conjugate(self.p))
            }
        }
    }

    fn body(&self, d: usize) -> Body {
        let base = Body::lp_ball(self.p, d).unwrap();
        match &self.map {
            None => base,
            Some(t) => Body::linear_image(base, Matrix::from_rows(t).unwrap()).unwrap(),
        }
    }
}

/// `|sum_j h_ij eps_j theta_j - mu_i| >= theta_i` for every row.
fn margins_met(h: &Rows, theta: &[f64], mu: &[f64], eps: &[i8]) -> bool {
    (0..h.len()).all(|i| {
        let s: f64 = (0..h.len()).map(|j| h[i][j] * f64::from(eps[j]) * theta[j]).sum();
        (s - mu[i]).abs() >= theta[i] - 1e-12
    })
}

fn any_signs(h: &Rows, theta: &[f64], mu: &[f64]) -> bool {
    let n = h.len();
    (0..1u32 << n).any(|mask| {
        let eps: Vec<i8> = (0..n).map(|j| if mask >> j & 1 == 0 { 1 } else { -1 }).collect();
        margins_met(h, theta, mu, &eps)
    })
}

// ------------------------------------------------------------- instances

fn rng(tag: u64, k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(tag.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ k)
}

fn unit_diagonal(n: usize, r: &mut ChaCha8Rng) -> Rows {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { r.random_range(-1.0..1.0) }).collect()).collect()
}

fn gaussian(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> Rows {
    (0..rows).map(|_| (0..cols).map(|_| StandardNormal.sample(r)).collect()).collect()
}

fn matrix(rows: &Rows) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

struct EqualWidthCase {
    a: Rows,
    m: Vec<f64>,
}

fn equal_width_corpus() -> Vec<EqualWidthCase> {
    (0..500)
        .map(|k| {
            let mut r = rng(1, k);
            let n = r.random_range(2..=32);
            let a = unit_diagonal(n, &mut r);
            let m = (0..n).map(|_| r.random_range(-1.0..1.0) / n as f64).collect();
            EqualWidthCase { a, m }
        })
        .collect()
}

// -------------------------------------------------------------- criteria

fn equal_width_contract(cases: &[EqualWidthCase], theta_sums: &mut Vec<(f64, usize)>) -> Outcome {
    let mut worst_norm = f64::NEG_INFINITY;
    let mut worst_margin = f64::INFINITY;
    for (k, c) in cases.iter().enumerate() {
        let n = c.a.len();
        let sol =
            solve_equal_width(&matrix(&c.a), &c.m, &SolverOptions::default()).map_err(|e| format!("case {k}: {e}"))?;
        theta_sums.push((sol.stats.theta_sq_sum, n));
        let target = 1.0 / n as f64;
        let l2sq: f64 = sol.lambda.iter().map(|l| l * l).sum();
        worst_norm = worst_norm.max(l2sq - target);
        for i in 0..n {
            let margin = (dot(&c.a[i], &sol.lambda) - c.m[i]).abs();
            worst_margin = worst_margin.min(margin - target);
        }
        if l2sq > target + 1e-9 || worst_margin < -1e-9 {
            return Err(format!(
                "case {k} (n = {n}): sum lambda^2 - 1/n = {:e}, margin slack {worst_margin:e}",
                l2sq - target
            ));
        }
    }
    Ok(format!(
        "{} instances, max(sum lambda^2 - 1/n) = {worst_norm:.2e}, min margin slack = {worst_margin:.2e}",
        cases.len()
    ))
}

fn scaling_quality(cases: &[EqualWidthCase], theta_sums: &mut Vec<(f64, usize)>) -> Outcome {
    let (mut res, mut eig, mut rec, mut rise) = (0.0f64, f64::INFINITY, 0.0f64, f64::NEG_INFINITY);
    for (k, c) in cases.iter().enumerate() {
        let r: SymmetrizationResult =
            symmetrize(&matrix(&c.a), &ScalingConfig::default()).map_err(|e| format!("case {k}: {e}"))?;
        let n = c.a.len();
        let h = rows_of(&r.h);
        let u = rows_of(&r.u);
        theta_sums.push((r.theta.iter().map(|t| t * t).sum(), n));
        let residual = (0..n).map(|i| (h[i][i] - 1.0).abs()).fold(0.0, f64::max);
        let min_eig = jacobi_eigenvalues(&h).into_iter().fold(f64::INFINITY, f64::min);
        let scaled: Rows = c.a.iter().zip(&r.theta).map(|(row, t)| row.iter().map(|v| v * t).collect()).collect();
        let reconstruction = max_abs_diff(&matmul(&scaled, &u), &h);
        let orth = max_abs_diff(&matmul(&transpose(&u), &u), &rows_of(&Matrix::identity(n)));
        let step_rise = r.nuclear_history.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        res = res.max(residual);
        eig = eig.min(min_eig);
        rec = rec.max(reconstruction.max(orth));
        rise = rise.max(step_rise);
        if residual > 1e-8 || min_eig < -1e-9 || reconstruction > 1e-9 || orth > 1e-9 || step_rise > 1e-12 {
            return Err(format!(
                "case {k}: residual {residual:e}, min eigenvalue {min_eig:e}, reconstruction {reconstruction:e}, orthogonality {orth:e}, nuclear rise {step_rise:e}"
            ));
        }
    }
    Ok(format!(
        "residual <= {res:.1e}, min eigenvalue >= {eig:.1e}, reconstruction <= {rec:.1e}, largest nuclear step {rise:.1e}"
    ))
}

fn theta_budget(theta_sums: &[(f64, usize)]) -> Outcome {
    let worst = theta_sums.iter().map(|(s, n)| s - *n as f64).fold(f64::NEG_INFINITY, f64::max);
    if worst > 1e-8 {
        return Err(format!("sum theta^2 exceeds the size by {worst:e}"));
    }
    Ok(format!("{} scalings, max(sum theta^2 - size) = {worst:.2e}", theta_sums.len()))
}

fn trace_inequalities() -> Outcome {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for k in 0..1000 {
        let mut r = rng(4, k);
        let n = r.random_range(1..=16);
        let rank = r.random_range(1..=n);
        let g = gaussian(n, rank, &mut r);
        let h = matmul(&g, &transpose(&g));
        let h = (0..n).map(|i| (0..n).map(|j| 0.5 * (h[i][j] + h[j][i])).collect()).collect::<Rows>();
        let u = random_orthogonal(n, r.random()).map_err(|e| e.to_string())?;
        let hu = matmul(&h, &rows_of(&u));
        let lhs: f64 = (0..n).map(|i| hu[i][i] * hu[i][i] / h[i][i]).sum();
        let rhs: f64 = (0..n).map(|i| h[i][i]).sum();
        let (lib_lhs, lib_rhs) = diagonal_quotient_bound(&matrix(&h), &u).map_err(|e| format!("pair {k}: {e}"))?;
        let scaled: Rows =
            h.iter().enumerate().map(|(i, row)| row.iter().map(|v| v / h[i][i].sqrt()).collect()).collect();
        let lhs2 = nuclear(&scaled);
        let rhs2 = (n as f64).sqrt() * nuclear(&h).sqrt();
        let (lib_lhs2, lib_rhs2) = normalized_nuclear_bound(&matrix(&h)).map_err(|e| format!("pair {k}: {e}"))?;
        first = first.max(lhs - rhs).max(lib_lhs - lib_rhs);
        second = second.max(lhs2 - rhs2).max(lib_lhs2 - lib_rhs2);
        if lhs > rhs + 1e-8 || lib_lhs > lib_rhs + 1e-8 || lhs2 > rhs2 + 1e-8 || lib_lhs2 > lib_rhs2 + 1e-8 {
            return Err(format!("pair {k} (n = {n}): {lhs} vs {rhs}, {lhs2} vs {rhs2}"));
        }
    }
    Ok(format!("1000 pairs each, max(lhs - rhs) = {first:.2e} and {second:.2e}"))
}

fn sign_search() -> Outcome {
    let mut flips = 0;
    for k in 0..200 {
        let mut r = rng(5, k);
        let n = r.random_range(2..=12);
        let mut h = vec![vec![1.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = r.random_range(-1.5..1.5);
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        let theta: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let mu: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let inst = BangInstance::new(matrix(&h), theta.clone(), mu.clone()).map_err(|e| e.to_string())?;
        let opts = BangOptions { record_objective: true, ..BangOptions::default() };
        let run = bang_search(&inst, &opts).map_err(|e| format!("case {k}: {e}"))?;
        if !margins_met(&h, &theta, &mu, run.signs.as_slice()) {
            return Err(format!("case {k}: local search signs miss a margin"));
        }
        if !any_signs(&h, &theta, &mu) || exhaustive_signs(&inst).map_err(|e| e.to_string())?.is_none() {
            return Err(format!("case {k}: enumeration found no feasible signs"));
        }
        let trace = &run.objective_trace;
        if trace.len() != run.flips + 1 || trace.windows(2).any(|w| w[1] <= w[0]) {
            return Err(format!("case {k}: objective not strictly increasing over {} flips", run.flips));
        }
        let eps: Vec<f64> = run.signs.as_slice().iter().map(|&s| f64::from(s)).collect();
        let objective: f64 =
            (0..n).map(|i| (0..n).map(|j| h[i][j] * eps[i] * eps[j] * theta[i] * theta[j]).sum::<f64>()).sum::<f64>()
                - 2.0 * (0..n).map(|i| eps[i] * theta[i] * mu[i]).sum::<f64>();
        if (objective - trace[trace.len() - 1]).abs() > 1e-9 * (1.0 + objective.abs()) {
            return Err(format!("case {k}: final objective {} but recomputed {objective}", trace[trace.len() - 1]));
        }
        flips += run.flips;
    }
    Ok(format!("200 instances feasible, enumeration agrees, {flips} flips all strictly increasing"))
}

fn asymmetric_counterexample() -> Outcome {
    let h = vec![vec![1.0, 1.0], vec![-1.0, 1.0]];
    if any_signs(&h, &[1.0, 1.0], &[0.0, 0.0]) {
        return Err("enumeration found feasible signs".into());
    }
    let inst = BangInstance::new(matrix(&h), vec![1.0, 1.0], vec![0.0, 0.0]).map_err(|e| e.to_string())?;
    if exhaustive_signs(&inst).map_err(|e| e.to_string())?.is_some() {
        return Err("library enumeration found feasible signs".into());
    }
    match bang_signs(&inst, 1000) {
        Err(Error::NotSymmetric { asymmetry }) => {
            Ok(format!("no signs of 4 work; search rejects it (asymmetry {asymmetry})"))
        }
        other => Err(format!("search returned {other:?}")),
    }
}

fn general_widths(theta_sums: &mut Vec<(f64, usize)>) -> Outcome {
    let opts = SolverOptions::default();
    let (mut margin, mut l1, mut weighted) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for k in 0..100 {
        let mut r = rng(7, k);
        let n = r.random_range(2..=8);
        let a = unit_diagonal(n, &mut r);
        let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| 0.9 * v / total).collect();
        let m: Vec<f64> = (0..n).map(|_| r.random_range(-0.5..0.5)).collect();
        let sys = PlankSystem::new(matrix(&a), m.clone(), w.clone()).map_err(|e| e.to_string())?;
        let width_sum: f64 = w.iter().sum();
        for (resolution, check_weighted) in [(SheetResolution::Auto, false), (SheetResolution::Fixed(64 * n), true)] {
            let sol =
                solve_general(&sys, Strategy::Replicate, resolution, &opts).map_err(|e| format!("case {k}: {e}"))?;
            theta_sums.push((sol.stats.theta_sq_sum, sol.stats.system_size));
            let slack = (0..n).map(|i| (dot(&a[i], &sol.lambda) - m[i]).abs() - w[i]).fold(f64::INFINITY, f64::min);
            let abs_sum: f64 = sol.lambda.iter().map(|l| l.abs()).sum();
            let wn: f64 = sol.lambda.iter().zip(&w).map(|(l, w)| l * l / w).sum();
            margin = margin.min(slack);
            l1 = l1.max(abs_sum - 1.0);
            if slack < -1e-9 || abs_sum > 1.0 + 1e-9 {
                return Err(format!("case {k} ({resolution:?}): margin slack {slack:e}, sum |lambda| = {abs_sum}"));
            }
            if check_weighted {
                weighted = weighted.max(wn / width_sum);
                if wn > width_sum * 1.10 {
                    return Err(format!("case {k} (n = {n}): weighted norm {wn} > 1.10 * {width_sum}"));
                }
            }
        }
    }
    Ok(format!(
        "100 instances, min margin slack {margin:.2e}, max(sum |lambda| - 1) = {l1:.2e}, weighted / sum w <= {weighted:.4}"
    ))
}

fn homothets() -> Outcome {
    let (mut gauge_slack, mut margin_slack) = (f64::INFINITY, f64::INFINITY);
    let mut mapped = 0;
    for k in 0..200 {
        let mut r = rng(8, k);
        let d = r.random_range(1..=8);
        let n = r.random_range(1..=20);
        let p = [1.0, 1.5, 2.0, 3.0, f64::INFINITY][r.random_range(0..5)];
        let map = if r.random_bool(0.4) {
            mapped += 1;
            let g = gaussian(d, d, &mut r);
            Some((0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j)) + 0.4 * g[i][j]).collect()).collect())
        } else {
            None
        };
        let shape = Shape { p, map };
        let hps: Vec<Hyperplane> = (0..n)
            .map(|_| {
                let normal: Vec<f64> = gaussian(1, d, &mut r).remove(0);
                Hyperplane::new(normal, r.random_range(-1.0..1.0))
            })
            .collect();
        let res =
            solve_corollary(&shape.body(d), &hps, &SolverOptions::default()).map_err(|e| format!("case {k}: {e}"))?;
        let nf = n as f64;
        let g = shape.gauge(&res.center);
        let gs = nf / (nf + 1.0) - g;
        let ms = hps
            .iter()
            .map(|h| (dot(&h.normal, &res.center) - h.offset).abs() / shape.dual(&h.normal) - 1.0 / (nf + 1.0))
            .fold(f64::INFINITY, f64::min);
        gauge_slack = gauge_slack.min(gs);
        margin_slack = margin_slack.min(ms);
        if gs < -1e-9 || ms < -1e-9 {
            return Err(format!("case {k} (d = {d}, n = {n}, p = {p}): gauge slack {gs:e}, margin slack {ms:e}"));
        }
    }
    Ok(format!(
        "200 instances ({mapped} mapped), min gauge slack {gauge_slack:.2e}, min margin slack {margin_slack:.2e}"
    ))
}

fn sharpness() -> Outcome {
    let mut worst = 0.0f64;
    for n in 1..=6 {
        let (body, hps) = sharpness_instance(n, 2).map_err(|e| e.to_string())?;
        let res = solve_corollary(&body, &hps, &SolverOptions::default()).map_err(|e| e.to_string())?;
        let ratio = 1.0 / (n as f64 + 1.0);
        let min_margin = hps
            .iter()
            .map(|h| (dot(&h.normal, &res.center) - h.offset).abs() / lp_norm(&h.normal, 1.0))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((min_margin - ratio).abs());
        if (min_margin - ratio).abs() > 1e-6 {
            return Err(format!("n = {n}: min margin {min_margin}, expected {ratio}"));
        }
        if let Some(hit) = grid_search_2d(&body, &hps, ratio + 1e-2, 2048).map_err(|e| e.to_string())? {
            return Err(format!("n = {n}: grid found a center {:?} at ratio {}", hit.center, ratio + 1e-2));
        }
    }
    Ok(format!("n = 1..6 within {worst:.1e} of 1/(n+1); no grid center at 1/(n+1) + 0.01"))
}

fn dual_functionals() -> Outcome {
    let (mut norm, mut margin) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..100 {
        let mut r = rng(10, k);
        let p = if k % 2 == 0 { 2.0 } else { f64::INFINITY };
        let d = r.random_range(1..=6);
        let n = r.random_range(1..=8);
        let body = Body::lp_ball(p, d).unwrap();
        let points: Rows = (0..n)
            .map(|_| {
                let x = gaussian(1, d, &mut r).remove(0);
                let g = lp_norm(&x, p);
                x.iter().map(|v| v / g).collect()
            })
            .collect();
        let m: Vec<f64> = (0..n).map(|_| r.random_range(-0.5..0.5)).collect();
        let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| 0.9 * v / total).collect();
        let sol =
            solve_dual(&body, &points, &m, &w, Strategy::Replicate, SheetResolution::Auto, &SolverOptions::default())
                .map_err(|e| format!("case {k}: {e}"))?;
        let dn = lp_norm(&sol.functional, conjugate(p));
        let ms = (0..n).map(|i| (dot(&sol.functional, &points[i]) - m[i]).abs() - w[i]).fold(f64::INFINITY, f64::min);
        norm = norm.max(dn);
        margin = margin.min(ms);
        if dn > 1.0 + 1e-9 || ms < -1e-9 {
            return Err(format!("case {k} (p = {p}, d = {d}, n = {n}): dual norm {dn}, margin slack {ms:e}"));
        }
    }
    Ok(format!("100 instances, max dual norm {norm:.12}, min margin slack {margin:.2e}"))
}

fn analytic_values() -> Outcome {
    let a = Matrix::from_rows(&[[1.0, 1.0], [0.5, 1.0]]).unwrap();
    let nn = nuclear_norm(&a).map_err(|e| e.to_string())?;
    let expected = 17f64.sqrt() / 2.0;
    if (nn - expected).abs() > 1e-12 {
        return Err(format!("nuclear norm {nn}, expected {expected}"));
    }
    let polar = polar_decompose(&a).map_err(|e| e.to_string())?;
    let s = 17f64.sqrt();
    let psd = vec![vec![5.0 / s, 3.0 / s], vec![3.0 / s, 3.5 / s]];
    let perr = max_abs_diff(&rows_of(&polar.psd_part), &psd);
    if perr > 1e-10 {
        return Err(format!("polar factor off by {perr:e}"));
    }
    let r = symmetrize(&a, &ScalingConfig::default()).map_err(|e| e.to_string())?;
    let ratio = r.theta[0] / r.theta[1];
    let rerr = (ratio - (5.0f64 / 8.0).sqrt()).abs();
    if rerr > 1e-8 {
        return Err(format!("theta ratio {ratio}, off by {rerr:e}"));
    }
    Ok(format!(
        "nuclear norm off by {:.1e}, polar factor by {perr:.1e}, theta ratio by {rerr:.1e}",
        (nn - expected).abs()
    ))
}

fn plank(args: &[&str]) -> (i32, Vec<u8>, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_plank")).args(args).output().expect("spawn plank");
    (out.status.code().unwrap_or(-1), out.stdout, String::from_utf8_lossy(&out.stderr).into_owned())
}

fn cli_round_trip() -> Outcome {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let scratch = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&scratch).map_err(|e| e.to_string())?;
    let mut files: Vec<PathBuf> = fs::read_dir(root.join("corpus"))
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.len() != 500 {
        return Err(format!("corpus has {} files, expected 500", files.len()));
    }
    let failures: Vec<String> = std::thread::scope(|scope| {
        let chunks: Vec<_> = files
            .chunks(files.len().div_ceil(8))
            .map(|chunk| {
                let scratch = &scratch;
                scope.spawn(move || {
                    let mut bad = Vec::new();
                    for f in chunk {
                        let input = f.to_str().unwrap();
                        let sol = scratch.join(f.file_name().unwrap());
                        let (code, _, err) = plank(&["solve", input, "--output", sol.to_str().unwrap()]);
                        if code != 0 {
                            bad.push(format!("solve {}: exit {code} {err}", f.display()));
                            continue;
                        }
                        let (code, out, _) = plank(&["verify", input, sol.to_str().unwrap()]);
                        if code != 0 {
                            bad.push(format!("verify {}: exit {code} {}", f.display(), String::from_utf8_lossy(&out)));
                        }
                    }
                    bad
                })
            })
            .collect();
        chunks.into_iter().flat_map(|c| c.join().unwrap()).collect()
    });
    if let Some(first) = failures.first() {
        return Err(format!("{} of 500 failed, first: {first}", failures.len()));
    }

    let golden = root.join("tests/golden");
    let corpus = |n: &str| root.join("corpus").join(format!("{n}.json")).to_string_lossy().into_owned();
    let checks: Vec<(String, Vec<String>)> = vec![
        ("demo-svg-basic-cube-line.svg".into(), vec!["demo-svg".into(), corpus("basic-cube-line")]),
        ("demo-svg-sharp-n3.svg".into(), vec!["demo-svg".into(), corpus("sharp-n3")]),
        ("davenport-1.txt".into(), vec!["davenport".into(), "--n".into(), "1".into()]),
        ("davenport-5.txt".into(), vec!["davenport".into(), "--n".into(), "5".into()]),
        ("davenport-10.txt".into(), vec!["davenport".into(), "--n".into(), "10".into()]),
    ];
    for (name, args) in &checks {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let expected = fs::read(golden.join(name)).map_err(|e| format!("{name}: {e}"))?;
        for _ in 0..2 {
            let (code, out, _) = plank(&args);
            if code != 0 || out != expected {
                return Err(format!("{name}: output differs from golden (exit {code})"));
            }
        }
    }
    Ok(format!("500/500 solve and verify, {} golden outputs byte-identical over two runs", checks.len()))
}

fn main() -> ExitCode {
    let cases = equal_width_corpus();
    let mut solver_thetas = Vec::new();
    let mut scaling_thetas = Vec::new();
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "equal-width contract", equal_width_contract(&cases, &mut solver_thetas)),
        (2, "symmetric scaling", scaling_quality(&cases, &mut scaling_thetas)),
        (4, "trace inequalities", trace_inequalities()),
        (5, "sign search vs enumeration", sign_search()),
        (6, "asymmetric counterexample", asymmetric_counterexample()),
        (7, "general widths", general_widths(&mut solver_thetas)),
    ];
    // The budget covers the solver's own scalings and the standalone ones.
    solver_thetas.extend(scaling_thetas);
    results.extend([
        (3, "sum theta^2 budget", theta_budget(&solver_thetas)),
        (8, "homothets in convex bodies", homothets()),
        (9, "sharpness on the square", sharpness()),
        (10, "dual functionals", dual_functionals()),
        (11, "analytic values", analytic_values()),
        (12, "cli round trip and goldens", cli_round_trip()),
    ]);
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (k, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {k:>2}  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {k:>2}  {name}: {detail}");
            }
        }
    }
    println!("{}/{} criteria passed in {:.1}s", results.len() - failed, results.len(), start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
