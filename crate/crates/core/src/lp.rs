//! Dense two-phase tableau simplex for small linear programs.
//!
//! Problems are stated as `minimize c^T x` subject to row constraints and
//! `x >= 0`. After the pivoting phase the final basis is re-factorised with an
//! LU decomposition so that primal values and row duals are accurate to
//! working precision rather than to the accumulated tableau error.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Self { coeffs, relation, rhs }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    /// Objective to minimise.
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Sensitivity of the optimal objective to each constraint's right-hand side.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit of {0} pivots reached")]
    IterationLimit(usize),
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("final basis is numerically singular")]
    SingularBasis,
}

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_SWITCH: usize = 50;

struct Tableau {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    reduced: Vec<f64>,
    pivots: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    fn price(&mut self, cost: &[f64]) {
        self.reduced.copy_from_slice(cost);
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.a[i * self.cols..(i + 1) * self.cols];
                for (r, &v) in self.reduced.iter_mut().zip(row) {
                    *r -= cb * v;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let cols = self.cols;
        let p = self.at(r, c);
        for v in &mut self.a[r * cols..(r + 1) * cols] {
            *v /= p;
        }
        self.rhs[r] /= p;
        let (pivot_row, pivot_rhs) = (self.a[r * cols..(r + 1) * cols].to_vec(), self.rhs[r]);
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.a[i * cols + c];
            if f != 0.0 {
                for (v, &pv) in self.a[i * cols..(i + 1) * cols].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.a[i * cols + c] = 0.0;
                self.rhs[i] -= f * pivot_rhs;
                if self.rhs[i] < 0.0 && self.rhs[i] > -FEAS_TOL {
                    self.rhs[i] = 0.0;
                }
            }
        }
        let f = self.reduced[c];
        if f != 0.0 {
            for (v, &pv) in self.reduced.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.reduced[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs primal simplex on the current basis with the given costs.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool], limit: usize) -> Result<(), LpError> {
        self.price(cost);
        let scale = 1.0 + cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut degenerate_run = 0usize;
        loop {
            if self.pivots >= limit {
                return Err(LpError::IterationLimit(limit));
            }
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            let mut entering = None;
            let mut best = -COST_TOL * scale;
            for (j, ok) in allowed.iter().enumerate().take(self.cols) {
                if *ok && self.reduced[j] < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = self.reduced[j];
                }
            }
            let Some(c) = entering else { return Ok(()) };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let v = self.at(i, c);
                if v > PIVOT_TOL {
                    let ratio = self.rhs[i] / v;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            if ratio < lr - 1e-14 {
                                true
                            } else if ratio <= lr + 1e-14 {
                                if bland {
                                    self.basis[i] < self.basis[li]
                                } else {
                                    v > self.at(li, c)
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else { return Err(LpError::Unbounded) };
            if ratio <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, c);
        }
    }
}

/// Solves the linear program, returning an optimal basic solution.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let n = lp.objective.len();
    let m = lp.constraints.len();
    if n == 0 {
        return Err(LpError::Malformed("no variables".into()));
    }
    for (i, row) in lp.constraints.iter().enumerate() {
        if row.coeffs.len() != n {
            return Err(LpError::Malformed(format!(
                "constraint {i} has {} coefficients, expected {n}",
                row.coeffs.len()
            )));
        }
        if !row.rhs.is_finite() || row.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Malformed(format!("constraint {i} has non-finite data")));
        }
    }
    if lp.objective.iter().any(|v| !v.is_finite()) {
        return Err(LpError::Malformed("objective has non-finite entries".into()));
    }

    // Normalise to non-negative right-hand sides.
    let mut sign = vec![1.0; m];
    let mut rel = Vec::with_capacity(m);
    for (i, row) in lp.constraints.iter().enumerate() {
        let mut r = row.relation;
        if row.rhs < 0.0 {
            sign[i] = -1.0;
            r = match r {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        } else if row.rhs == 0.0 && r == Relation::Ge {
            sign[i] = -1.0;
            r = Relation::Le;
        }
        rel.push(r);
    }

    let slack_count = rel.iter().filter(|r| **r != Relation::Eq).count();
    let art_count = rel.iter().filter(|r| **r != Relation::Le).count();
    let cols = n + slack_count + art_count;
    let mut a = vec![0.0; m * cols];
    let mut rhs = vec![0.0; m];
    let mut basis = vec![0; m];
    let mut is_art = vec![false; cols];
    let (mut next_slack, mut next_art) = (n, n + slack_count);
    for (i, row) in lp.constraints.iter().enumerate() {
        for (j, &v) in row.coeffs.iter().enumerate() {
            a[i * cols + j] = sign[i] * v;
        }
        rhs[i] = sign[i] * row.rhs;
        match rel[i] {
            Relation::Le => {
                a[i * cols + next_slack] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                a[i * cols + next_slack] = -1.0;
                next_slack += 1;
                a[i * cols + next_art] = 1.0;
                is_art[next_art] = true;
                basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                a[i * cols + next_art] = 1.0;
                is_art[next_art] = true;
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }
    let original = a.clone();
    let b = rhs.clone();
    let mut tab = Tableau { rows: m, cols, a, rhs, basis, reduced: vec![0.0; cols], pivots: 0 };
    let limit = 50 * (m + cols) + 1000;

    if art_count > 0 {
        let phase1: Vec<f64> = is_art.iter().map(|&art| if art { 1.0 } else { 0.0 }).collect();
        let all = vec![true; cols];
        tab.optimize(&phase1, &all, limit)?;
        let infeas: f64 = (0..m).filter(|&i| is_art[tab.basis[i]]).map(|i| tab.rhs[i]).sum();
        let scale = 1.0 + b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if infeas > FEAS_TOL * scale {
            return Err(LpError::Infeasible);
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..m {
            if is_art[tab.basis[i]] {
                if let Some(j) = (0..cols).find(|&j| !is_art[j] && tab.at(i, j).abs() > 1e-9) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    let allowed: Vec<bool> = is_art.iter().map(|a| !a).collect();
    tab.optimize(&cost, &allowed, limit)?;

    // Re-solve on the final basis for accurate primal and dual values.
    let bmat = DMatrix::from_fn(m, m, |i, k| original[i * cols + tab.basis[k]]);
    let lu = bmat.clone().lu();
    let xb = lu.solve(&DVector::from_vec(b.clone())).ok_or(LpError::SingularBasis)?;
    let cb = DVector::from_iterator(m, tab.basis.iter().map(|&j| cost[j]));
    let y = bmat.transpose().lu().solve(&cb).ok_or(LpError::SingularBasis)?;

    let mut x = vec![0.0; n];
    for (k, &j) in tab.basis.iter().enumerate() {
        if j < n {
            x[j] = xb[k].max(0.0);
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let duals = (0..m).map(|i| sign[i] * y[i]).collect();
    Ok(LpSolution { x, objective, duals, pivots: tab.pivots })
}
