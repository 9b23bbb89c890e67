//! The extrapolation-weight subproblem
//!
//! ```text
//! min ||R c||_2   s.t.   1^T c = 1,  ||c||_1 <= C
//! ```
//!
//! solved to an additive precision of `rel_tol * ||R e_0||`.
//!
//! The feasible set is a polytope whose vertices are
//! `((C+1)/2) e_i - ((C-1)/2) e_j` for `i != j` (or the unit vectors when
//! `C = 1`), so a conditional-gradient method only needs an argmin/argmax scan
//! of the gradient. We run away-step Frank-Wolfe on the small triangular factor
//! of `R` and, after every major step, re-minimise over the affine hull of the
//! active vertices (Wolfe's minor cycle). The minor cycle makes the method
//! terminate on the exact optimum in a handful of iterations for the tiny
//! dimensions involved. When the equality-constrained minimiser already lies
//! inside the l1 ball it is returned directly.

use crate::error::argument;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Columns `x_i - x_{i+1}` of consecutive fixed-point iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    m: DMatrix<f64>,
}

impl ResidualMatrix {
    pub fn new(m: DMatrix<f64>) -> Self {
        Self { m }
    }

    /// Builds `[x_0 - x_1, ..., x_k - x_{k+1}]` from `k + 2` iterates.
    pub fn from_iterates(iterates: &[DVector<f64>]) -> crate::Result<Self> {
        if iterates.len() < 3 {
            return Err(argument("need at least three iterates for two residual columns"));
        }
        let n = iterates[0].len();
        if iterates.iter().any(|x| x.len() != n) {
            return Err(argument("iterates have inconsistent dimensions"));
        }
        let cols: Vec<DVector<f64>> = iterates.windows(2).map(|w| &w[0] - &w[1]).collect();
        Ok(Self { m: DMatrix::from_columns(&cols) })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    /// Window size `k`; the matrix has `k + 1` columns.
    pub fn k(&self) -> usize {
        self.m.ncols().saturating_sub(1)
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationWeights {
    pub c: DVector<f64>,
    pub l1: f64,
    pub residual_norm: f64,
    /// Upper bound on `residual_norm` minus the optimal residual norm.
    pub gap: f64,
}

impl ExtrapolationWeights {
    fn new(r: &DMatrix<f64>, c: DVector<f64>, gap: f64) -> Self {
        let l1 = c.iter().map(|v| v.abs()).sum();
        let residual_norm = scaled_norm(&(r * &c));
        Self { c, l1, residual_norm, gap }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LsqError {
    #[error(transparent)]
    Argument(#[from] crate::Error),
    #[error("weight solver stopped after {iterations} iterations with excess bound {}", .best.gap)]
    NotConverged { best: ExtrapolationWeights, iterations: usize },
}

impl LsqError {
    pub fn best(&self) -> Option<&ExtrapolationWeights> {
        match self {
            LsqError::NotConverged { best, .. } => Some(best),
            _ => None,
        }
    }
}

/// Lowest-index argmin and argmax of the gradient.
fn extreme_indices(gradient: &[f64]) -> (usize, usize) {
    let (mut lo, mut hi) = (0, 0);
    for (i, &g) in gradient.iter().enumerate() {
        if g < gradient[lo] {
            lo = i;
        }
        if g > gradient[hi] {
            hi = i;
        }
    }
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Vertex {
    Unit(usize),
    Pair { plus: usize, minus: usize },
}

impl Vertex {
    fn lmo(gradient: &[f64], c: f64) -> Self {
        let (i, j) = extreme_indices(gradient);
        if c == 1.0 || i == j {
            Vertex::Unit(i)
        } else {
            Vertex::Pair { plus: i, minus: j }
        }
    }

    fn dense(self, dim: usize, c: f64) -> DVector<f64> {
        let mut v = DVector::zeros(dim);
        match self {
            Vertex::Unit(i) => v[i] = 1.0,
            Vertex::Pair { plus, minus } => {
                v[plus] = (c + 1.0) / 2.0;
                v[minus] = -(c - 1.0) / 2.0;
            }
        }
        v
    }

    fn dot(self, g: &DVector<f64>, c: f64) -> f64 {
        match self {
            Vertex::Unit(i) => g[i],
            Vertex::Pair { plus, minus } => (c + 1.0) / 2.0 * g[plus] - (c - 1.0) / 2.0 * g[minus],
        }
    }
}

/// Vertex of `{1^T v = 1, ||v||_1 <= C}` minimising `<gradient, v>`.
pub fn linear_minimization(gradient: &[f64], c: f64) -> Vec<f64> {
    if gradient.is_empty() {
        return Vec::new();
    }
    Vertex::lmo(gradient, c).dense(gradient.len(), c).as_slice().to_vec()
}

/// Euclidean norm computed with a running scale, so that vectors of tiny or
/// huge magnitude do not underflow or overflow when squared.
pub fn scaled_norm(v: &DVector<f64>) -> f64 {
    let scale = v.camax();
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale) * (x / scale)).sum::<f64>().sqrt()
}

/// Minimum-norm least-squares solution of `a z = b` with relative rank cutoff.
fn lstsq(a: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    if n == 0 {
        return DVector::zeros(0);
    }
    let svd = a.svd(true, true);
    let eps = (svd.singular_values.max() * 1e-13).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(n))
}

/// Minimiser of `||M beta||` with `sum(beta) = 1`, parametrised around the first column.
fn affine_minimizer(m: &DMatrix<f64>) -> DVector<f64> {
    let s = m.ncols();
    let mut beta = DVector::zeros(s);
    beta[0] = 1.0;
    if s == 1 {
        return beta;
    }
    let base = m.column(0).into_owned();
    let d = DMatrix::from_fn(m.nrows(), s - 1, |r, j| m[(r, j + 1)] - base[r]);
    let z = lstsq(d, &(-&base));
    for j in 0..s - 1 {
        beta[j + 1] = z[j];
        beta[0] -= z[j];
    }
    beta
}

fn iteration_cap(k: usize, rel_tol: f64) -> usize {
    let digits = (1.0 / rel_tol).log10().ceil().clamp(1.0, 32.0) as usize;
    10 * (k + 1) * (k + 1) * digits
}

/// Solves the weight subproblem. Always returns feasible weights, either as
/// the result or inside [`LsqError::NotConverged`].
pub fn solve_weights(r: &ResidualMatrix, c: f64, rel_tol: f64) -> Result<ExtrapolationWeights, LsqError> {
    solve_weights_capped(r, c, rel_tol, iteration_cap(r.k(), rel_tol))
}

pub fn solve_weights_capped(
    r: &ResidualMatrix,
    c: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<ExtrapolationWeights, LsqError> {
    if !(c >= 1.0) {
        return Err(argument(format!("l1 budget C must be >= 1, got {c}")).into());
    }
    if !(rel_tol > 0.0) {
        return Err(argument(format!("rel_tol must be > 0, got {rel_tol}")).into());
    }
    let dim = r.m.ncols();
    if dim < 2 {
        return Err(argument("residual matrix needs at least two columns").into());
    }
    if !r.is_finite() {
        return Err(argument("residual matrix has non-finite entries").into());
    }
    let rm = &r.m;
    if let Some(j) = (0..dim).find(|&j| rm.column(j).iter().all(|&v| v == 0.0)) {
        let mut e = DVector::zeros(dim);
        e[j] = 1.0;
        return Ok(ExtrapolationWeights::new(rm, e, 0.0));
    }

    // The minimiser is invariant under scaling R, so work at unit scale.
    // Everything below only needs the triangular factor: ||R c|| = ||T c||.
    let scale = rm.camax();
    let unit = rm / scale;
    let t = if rm.nrows() > dim { unit.qr().r() } else { unit };
    let target = rel_tol * t.column(0).norm();

    // Equality-constrained minimiser; optimal if it fits in the l1 ball.
    let c_eq = affine_minimizer(&t);
    let eq_l1: f64 = c_eq.iter().map(|v| v.abs()).sum();
    if c_eq.iter().all(|v| v.is_finite()) && eq_l1 <= c {
        return Ok(ExtrapolationWeights::new(rm, c_eq, 0.0));
    }

    let mut atoms: Vec<Vertex> = vec![Vertex::Unit(0)];
    let mut alpha: Vec<f64> = vec![1.0];
    let mut x = Vertex::Unit(0).dense(dim, c);
    let mut best_bound = f64::INFINITY;
    let mut best = x.clone();

    for _ in 0..max_iter {
        let tx = &t * &x;
        let g = t.transpose() * &tx;
        let res = tx.norm();
        let s = Vertex::lmo(g.as_slice(), c);
        let gx = g.dot(&x);
        let fw_gap = (gx - s.dot(&g, c)).max(0.0);
        // excess over the optimal norm; `res` itself bounds it since the optimum is >= 0
        let bound = if res > 0.0 { (2.0 * fw_gap / res).min((2.0 * fw_gap).sqrt()).min(res) } else { 0.0 };
        if bound < best_bound {
            best_bound = bound;
            best = x.clone();
        }
        if bound <= target {
            return Ok(ExtrapolationWeights::new(rm, x, bound * scale));
        }

        let (away_idx, away_val) = atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (i, a.dot(&g, c)))
            .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
        let away_gap = away_val - gx;

        if fw_gap >= away_gap || atoms.len() == 1 {
            let d = s.dense(dim, c) - &x;
            let gamma = line_search(&t, &g, &d, 1.0);
            for a in alpha.iter_mut() {
                *a *= 1.0 - gamma;
            }
            match atoms.iter().position(|&a| a == s) {
                Some(p) => alpha[p] += gamma,
                None => {
                    atoms.push(s);
                    alpha.push(gamma);
                }
            }
        } else {
            let a_v = alpha[away_idx];
            let gamma_max = a_v / (1.0 - a_v);
            let d = &x - atoms[away_idx].dense(dim, c);
            let gamma = line_search(&t, &g, &d, gamma_max);
            for a in alpha.iter_mut() {
                *a *= 1.0 + gamma;
            }
            alpha[away_idx] -= gamma;
        }
        prune(&mut atoms, &mut alpha);
        minor_cycle(&t, dim, c, &mut atoms, &mut alpha);
        x = combine(&atoms, &alpha, dim, c);
    }
    Err(LsqError::NotConverged { best: ExtrapolationWeights::new(rm, best, best_bound * scale), iterations: max_iter })
}

/// Exact minimiser of `f(x + gamma d)` on `[0, gamma_max]`.
fn line_search(t: &DMatrix<f64>, g: &DVector<f64>, d: &DVector<f64>, gamma_max: f64) -> f64 {
    let slope = g.dot(d);
    let curv = (t * d).norm_squared();
    if slope >= 0.0 {
        return 0.0;
    }
    if curv <= 0.0 {
        return gamma_max;
    }
    (-slope / curv).clamp(0.0, gamma_max)
}

fn prune(atoms: &mut Vec<Vertex>, alpha: &mut Vec<f64>) {
    let mut i = 0;
    while i < atoms.len() {
        if alpha[i] <= 1e-15 && atoms.len() > 1 {
            atoms.swap_remove(i);
            alpha.swap_remove(i);
        } else {
            i += 1;
        }
    }
    let total: f64 = alpha.iter().sum();
    for a in alpha.iter_mut() {
        *a /= total;
    }
}

fn combine(atoms: &[Vertex], alpha: &[f64], dim: usize, c: f64) -> DVector<f64> {
    let mut x = DVector::zeros(dim);
    for (a, &w) in atoms.iter().zip(alpha) {
        x.axpy(w, &a.dense(dim, c), 1.0);
    }
    x
}

/// Moves the convex weights toward the affine minimiser over the active
/// vertices, dropping vertices whose weight reaches zero on the way.
fn minor_cycle(t: &DMatrix<f64>, dim: usize, c: f64, atoms: &mut Vec<Vertex>, alpha: &mut Vec<f64>) {
    for _ in 0..=atoms.len() {
        let cols: Vec<DVector<f64>> = atoms.iter().map(|a| t * a.dense(dim, c)).collect();
        let beta = affine_minimizer(&DMatrix::from_columns(&cols));
        if beta.iter().any(|b| !b.is_finite()) {
            return;
        }
        if beta.iter().all(|&b| b > 0.0) {
            alpha.copy_from_slice(beta.as_slice());
            return;
        }
        let mut theta = 1.0f64;
        for (a, &b) in alpha.iter().zip(beta.iter()) {
            if b <= 0.0 && *a > b {
                theta = theta.min(*a / (*a - b));
            }
        }
        for (a, &b) in alpha.iter_mut().zip(beta.iter()) {
            *a += theta * (b - *a);
            if *a < 0.0 {
                *a = 0.0;
            }
        }
        let before = atoms.len();
        prune(atoms, alpha);
        if atoms.len() == before {
            return;
        }
    }
}
