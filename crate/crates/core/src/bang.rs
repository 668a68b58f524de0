//! Sign selection for symmetric unit-diagonal quadratic forms.
//!
//! For symmetric `H` with unit diagonal, non-negative `theta` and any `mu`,
//! some signs `eps` satisfy `|sum_j h_ij eps_j theta_j - mu_i| >= theta_i`
//! for every row. Any flip-local maximum of
//!
//! ```text
//! F(eps) = sum_ij h_ij eps_i eps_j theta_i theta_j - 2 sum_i eps_i theta_i mu_i
//! ```
//!
//! has this property: flipping `eps_k` changes `F` by
//! `4 theta_k^2 - 4 eps_k theta_k (S_k - mu_k)`, which is strictly positive
//! whenever row `k` is violated. The search below flips violated rows until
//! none remain; every flip strictly increases `F`, so it terminates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::SYMMETRY_TOL;
use crate::matrix::Matrix;

/// Flip budget used when the caller does not pick one.
pub const DEFAULT_MAX_FLIPS: usize = 1_000_000;

/// Relative slack on `theta_k` before a row counts as violated. Absorbs
/// round-off in the running row sums; a returned vector satisfies every
/// margin to within `theta_k * VIOLATION_RTOL`.
const VIOLATION_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BangInstance {
    pub h: Matrix,
    pub theta: Vec<f64>,
    pub mu: Vec<f64>,
}

impl BangInstance {
    /// Checks shapes, unit diagonal and `theta >= 0`. Symmetry is left to
    /// [`bang_signs`] so the oracle can still be pointed at asymmetric input.
    pub fn new(h: Matrix, theta: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        let n = h.rows();
        if !h.is_square() || theta.len() != n || mu.len() != n {
            return Err(Error::InvalidDimension(format!(
                "H is {}x{}, theta has {}, mu has {}",
                h.rows(),
                h.cols(),
                theta.len(),
                mu.len()
            )));
        }
        if let Some(i) = (0..n).find(|&i| (h[(i, i)] - 1.0).abs() > 1e-10) {
            return Err(Error::InvalidMatrix(format!("diagonal entry {i} is {}, expected 1", h[(i, i)])));
        }
        if let Some(i) = theta.iter().position(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidSystem(format!("theta[{i}] = {} is not >= 0", theta[i])));
        }
        if let Some(i) = mu.iter().position(|m| !m.is_finite()) {
            return Err(Error::InvalidSystem(format!("mu[{i}] is not finite")));
        }
        Ok(Self { h, theta, mu })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// `S_i - mu_i` for every row.
    pub fn offsets(&self, eps: &SignVector) -> Vec<f64> {
        let weighted: Vec<f64> = eps.0.iter().zip(&self.theta).map(|(&e, t)| f64::from(e) * t).collect();
        (0..self.len())
            .map(|i| self.h.row(i).iter().zip(&weighted).map(|(h, w)| h * w).sum::<f64>() - self.mu[i])
            .collect()
    }

    /// `(row, theta_i - margin_i)` for rows whose margin falls short by more
    /// than `slack`.
    pub fn violations(&self, eps: &SignVector, slack: f64) -> Vec<(usize, f64)> {
        self.offsets(eps)
            .iter()
            .zip(&self.theta)
            .enumerate()
            .filter(|(_, (_, &t))| t > 0.0)
            .map(|(i, (o, t))| (i, t - o.abs()))
            .filter(|(_, deficit)| *deficit > slack)
            .collect()
    }
}

/// A vector of `+1` / `-1` entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(i) = signs.iter().position(|s| *s != 1 && *s != -1) {
            return Err(Error::InvalidSystem(format!("sign {i} is {}, expected +-1", signs[i])));
        }
        Ok(Self(signs))
    }

    pub fn all_positive(n: usize) -> Self {
        Self(vec![1; n])
    }

    /// Signs read off the bits of `mask`, bit `n-1-j` giving entry `j` so
    /// that increasing masks run in lexicographic order with `+1 < -1`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self((0..n).map(|j| if mask >> (n - 1 - j) & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        f64::from(self.0[i])
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = -self.0[i];
    }
}

/// `F(eps)`, evaluated directly.
pub fn bang_objective(inst: &BangInstance, eps: &SignVector) -> Result<f64> {
    let n = inst.len();
    if eps.len() != n {
        return Err(Error::InvalidDimension(format!("{} signs for {n} rows", eps.len())));
    }
    let w: Vec<f64> = (0..n).map(|i| eps.get(i) * inst.theta[i]).collect();
    let mut quad = 0.0;
    for i in 0..n {
        let row: f64 = inst.h.row(i).iter().zip(&w).map(|(h, wj)| h * wj).sum();
        quad += w[i] * row;
    }
    let lin: f64 = w.iter().zip(&inst.mu).map(|(wi, m)| wi * m).sum();
    Ok(quad - 2.0 * lin)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BangOptions {
    pub max_flips: usize,
    /// Record `F` after every flip (costs `O(n^2)` per flip).
    pub record_objective: bool,
    /// Seed for one random restart if the budget runs out.
    pub restart_seed: Option<u64>,
}

impl Default for BangOptions {
    fn default() -> Self {
        Self { max_flips: DEFAULT_MAX_FLIPS, record_objective: false, restart_seed: None }
    }
}

#[derive(Debug, Clone)]
pub struct BangRun {
    pub signs: SignVector,
    pub flips: usize,
    pub restarted: bool,
    /// `F` at the start and after every flip, when recorded.
    pub objective_trace: Vec<f64>,
}

/// Signs meeting every margin, starting from all `+1`.
pub fn bang_signs(inst: &BangInstance, max_flips: usize) -> Result<SignVector> {
    let opts = BangOptions { max_flips, ..Default::default() };
    bang_search(inst, &opts).map(|run| run.signs)
}

pub fn bang_search(inst: &BangInstance, opts: &BangOptions) -> Result<BangRun> {
    let asymmetry = inst.h.asymmetry();
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry });
    }
    if opts.max_flips == 0 {
        return Err(Error::InvalidSystem("max_flips must be at least 1".into()));
    }
    match local_search(inst, SignVector::all_positive(inst.len()), opts) {
        Err(Error::FlipBudgetExceeded { .. }) if opts.restart_seed.is_some() => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.restart_seed.unwrap_or_default());
            let start = SignVector((0..inst.len()).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect());
            let mut run = local_search(inst, start, opts)?;
            run.restarted = true;
            Ok(run)
        }
        other => other,
    }
}

fn local_search(inst: &BangInstance, mut eps: SignVector, opts: &BangOptions) -> Result<BangRun> {
    let n = inst.len();
    let h = &inst.h;
    let theta = &inst.theta;
    let mut sums: Vec<f64> = inst.offsets(&eps).iter().zip(&inst.mu).map(|(o, m)| o + m).collect();
    let mut trace = Vec::new();
    if opts.record_objective {
        trace.push(bang_objective(inst, &eps)?);
    }

    let mut flips = 0;
    let mut best = (usize::MAX, eps.clone());
    loop {
        // Largest gain among violated rows, lowest index on ties.
        let mut pick: Option<(usize, f64)> = None;
        let mut violated = 0;
        for k in 0..n {
            let t = theta[k];
            if t == 0.0 {
                continue;
            }
            let offset = sums[k] - inst.mu[k];
            if offset.abs() >= t * (1.0 - VIOLATION_RTOL) {
                continue;
            }
            violated += 1;
            let gain = 4.0 * t * t - 4.0 * eps.get(k) * t * offset;
            if pick.is_none_or(|(_, g)| gain > g) {
                pick = Some((k, gain));
            }
        }
        if violated < best.0 {
            best = (violated, eps.clone());
        }

        let Some((k, _)) = pick else {
            // Re-derive the sums from scratch before accepting.
            let fresh: Vec<f64> = inst.offsets(&eps).iter().zip(&inst.mu).map(|(o, m)| o + m).collect();
            if fresh == sums {
                return Ok(BangRun { signs: eps, flips, restarted: false, objective_trace: trace });
            }
            sums = fresh;
            continue;
        };

        if flips >= opts.max_flips {
            let violations = inst.violations(&best.1, 0.0);
            return Err(Error::FlipBudgetExceeded { flips, best: best.1, violations });
        }
        eps.flip(k);
        let delta = 2.0 * eps.get(k) * theta[k];
        for (j, s) in sums.iter_mut().enumerate() {
            *s += h[(j, k)] * delta;
        }
        flips += 1;
        if opts.record_objective {
            trace.push(bang_objective(inst, &eps)?);
        }
    }
}

/// Outcome of checking one sign vector on the asymmetric counterexample.
#[derive(Debug, Clone)]
pub struct SignCheck {
    pub signs: SignVector,
    /// `sum_j h_ij eps_j theta_j - mu_i` per row.
    pub row_values: Vec<f64>,
    /// First row whose margin is below `theta_i`, if any.
    pub failing_row: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub matrix: Matrix,
    pub checks: Vec<SignCheck>,
    pub any_feasible: bool,
}

/// Exhausts all four sign vectors for `[[1, 1], [-1, 1]]` with `theta = (1, 1)`
/// and `mu = 0`: none meets the margins, which is why symmetry is required.
pub fn reject_asymmetric_counterexample() -> CounterexampleReport {
    let matrix = Matrix::from_rows(&[[1.0, 1.0], [-1.0, 1.0]]).expect("static matrix");
    let inst = BangInstance::new(matrix.clone(), vec![1.0, 1.0], vec![0.0, 0.0]).expect("valid instance");
    let checks: Vec<SignCheck> = (0..4u64)
        .map(|mask| {
            let signs = SignVector::from_mask(2, mask);
            let row_values = inst.offsets(&signs);
            let failing_row = row_values.iter().zip(&inst.theta).position(|(v, t)| v.abs() < *t);
            SignCheck { signs, row_values, failing_row }
        })
        .collect();
    let any_feasible = checks.iter().any(|c| c.failing_row.is_none());
    CounterexampleReport { matrix, checks, any_feasible }
}
