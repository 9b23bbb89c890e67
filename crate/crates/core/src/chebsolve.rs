//! Exchange-method oracle for the l1-constrained Chebyshev problem
//!
//! ```text
//! min_p  max_{x in [0, rho]} |p(x) - q(x)|   s.t.  deg p <= k, p(1) = 1, ||p||_1 <= C
//! ```
//!
//! with `q = 0` (direct mode) or `q = p*`, the unconstrained optimum
//! (projection mode). The continuum of constraints is discretised on a grid,
//! the resulting LP is solved, and the worst off-grid violator is added until
//! the true maximum is within `tol` of the LP value.
//!
//! The LP actually handed to the simplex is the dual of the epigraph form; it
//! has only `2k + 3` rows, all of them `<=` with non-negative right-hand side,
//! so no phase one is needed and pivots stay cheap as the grid grows.

use crate::lp::{solve_lp, Constraint, LinearProgram, LpError, Relation};
use crate::polynomials::{max_abs_on_interval, rescaled_cheb, Polynomial, DEFAULT_GRID_FACTOR, DEFAULT_REFINE_TOL};
use std::f64::consts::PI;
use thiserror::Error;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_EXCHANGES: usize = 50;
/// Initial grid size per unit of `k + 1`.
pub const INITIAL_GRID_FACTOR: usize = 32;
pub const MAX_DEGREE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Direct,
    Projection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimaxProblem {
    pub rho: f64,
    pub k: usize,
    pub c: f64,
    pub mode: Mode,
}

impl MinimaxProblem {
    pub fn direct(rho: f64, k: usize, c: f64) -> Self {
        Self { rho, k, c, mode: Mode::Direct }
    }

    pub fn projection(rho: f64, k: usize, c: f64) -> Self {
        Self { rho, k, c, mode: Mode::Projection }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxSolution {
    pub poly: Polynomial,
    /// In direct mode the LP value, a lower bound on the constrained optimum.
    /// In projection mode the max of `|poly|` on `[0, rho]`.
    pub value: f64,
    /// Off-grid maximum of the objective minus the LP value.
    pub certified_gap: f64,
    /// Number of LP solves.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChebError {
    #[error("l1 budget C = {0} < 1 leaves no polynomial with p(1) = 1")]
    Infeasible(f64),
    #[error(transparent)]
    Argument(#[from] crate::Error),
    #[error("LP solve failed: {0}")]
    Lp(#[from] LpError),
    #[error("exchange loop did not reach tolerance after {} LP solves (gap {})", .best.iterations, .best.certified_gap)]
    NotConverged { best: MinimaxSolution },
}

impl ChebError {
    /// Best solution found before giving up, if the failure carries one.
    pub fn best(&self) -> Option<&MinimaxSolution> {
        match self {
            ChebError::NotConverged { best } => Some(best),
            _ => None,
        }
    }
}

fn validate(problem: &MinimaxProblem, tol: f64) -> Result<(), ChebError> {
    let MinimaxProblem { rho, k, c, .. } = *problem;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(crate::error::argument(format!("rho must lie in (0, 1), got {rho}")).into());
    }
    if k == 0 || k > MAX_DEGREE {
        return Err(crate::error::argument(format!("k must lie in [1, {MAX_DEGREE}], got {k}")).into());
    }
    if !(tol > 0.0) {
        return Err(crate::error::argument(format!("tol must be > 0, got {tol}")).into());
    }
    if c.is_nan() || c < 1.0 {
        return Err(ChebError::Infeasible(c));
    }
    Ok(())
}

/// Chebyshev-Lobatto points on `[0, rho]`, both endpoints included.
pub fn initial_grid(rho: f64, k: usize) -> Vec<f64> {
    let n = INITIAL_GRID_FACTOR * (k + 1);
    (0..n)
        .map(|j| 0.5 * rho * (1.0 - (PI * j as f64 / (n - 1) as f64).cos()))
        .collect()
}

fn reference(problem: &MinimaxProblem) -> Result<Option<Polynomial>, ChebError> {
    Ok(match problem.mode {
        Mode::Direct => None,
        Mode::Projection => Some(rescaled_cheb(problem.rho, 0.0, problem.k)?),
    })
}

/// Solves the discretised problem on a fixed grid; returns the polynomial and the LP value.
pub fn solve_on_grid(problem: &MinimaxProblem, grid: &[f64]) -> Result<(Polynomial, f64), ChebError> {
    validate(problem, 1.0)?;
    let q = reference(problem)?;
    solve_grid_lp(problem, grid, q.as_ref())
}

fn solve_grid_lp(problem: &MinimaxProblem, grid: &[f64], q: Option<&Polynomial>) -> Result<(Polynomial, f64), ChebError> {
    let k = problem.k;
    let g = grid.len();
    let nvar = 2 * g + 3;
    let (lp_plus, lp_minus, w) = (2 * g, 2 * g + 1, 2 * g + 2);
    let qv: Vec<f64> = grid.iter().map(|&x| q.map_or(0.0, |q| q.eval(x))).collect();

    let mut objective = vec![0.0; nvar];
    for j in 0..g {
        objective[j] = qv[j];
        objective[g + j] = -qv[j];
    }
    objective[lp_plus] = -1.0;
    objective[lp_minus] = 1.0;
    objective[w] = problem.c;

    let mut constraints = Vec::with_capacity(2 * k + 3);
    let mut mass = vec![0.0; nvar];
    mass[..2 * g].iter_mut().for_each(|v| *v = 1.0);
    constraints.push(Constraint::new(mass, Relation::Le, 1.0));
    let mut powers = vec![1.0; g];
    let mut plus_rows = Vec::with_capacity(k + 1);
    let mut minus_rows = Vec::with_capacity(k + 1);
    for _ in 0..=k {
        let mut row = vec![0.0; nvar];
        for j in 0..g {
            row[j] = -powers[j];
            row[g + j] = powers[j];
        }
        row[lp_plus] = 1.0;
        row[lp_minus] = -1.0;
        row[w] = -1.0;
        let mut neg: Vec<f64> = row.iter().map(|v| -v).collect();
        neg[w] = -1.0;
        plus_rows.push(Constraint::new(row, Relation::Le, 0.0));
        minus_rows.push(Constraint::new(neg, Relation::Le, 0.0));
        for (p, &x) in powers.iter_mut().zip(grid) {
            *p *= x;
        }
    }
    constraints.extend(plus_rows);
    constraints.extend(minus_rows);

    let sol = solve_lp(&LinearProgram { objective, constraints })?;
    let coeffs: Vec<f64> = (0..=k).map(|i| sol.duals[k + 2 + i] - sol.duals[1 + i]).collect();
    Ok((Polynomial::new(coeffs), -sol.objective))
}

fn exchange(problem: &MinimaxProblem, tol: f64, max_exchanges: usize) -> Result<MinimaxSolution, ChebError> {
    validate(problem, tol)?;
    let q = reference(problem)?;
    let mut grid = initial_grid(problem.rho, problem.k);
    let grid_size = DEFAULT_GRID_FACTOR * (problem.k + 1);
    let mut best: Option<MinimaxSolution> = None;
    for it in 1..=max_exchanges {
        let (poly, t) = solve_grid_lp(problem, &grid, q.as_ref())?;
        let err = match &q {
            None => poly.clone(),
            Some(q) => poly.sub(q),
        };
        let (max, argmax) = max_abs_on_interval(&err, 0.0, problem.rho, grid_size, DEFAULT_REFINE_TOL)?;
        let value = match &q {
            None => t,
            Some(_) => max_abs_on_interval(&poly, 0.0, problem.rho, grid_size, DEFAULT_REFINE_TOL)?.0,
        };
        let sol = MinimaxSolution { poly, value, certified_gap: (max - t).max(0.0), iterations: it };
        if max <= t + tol {
            return Ok(sol);
        }
        let iterations = it;
        if best.as_ref().is_none_or(|b| sol.certified_gap < b.certified_gap) {
            best = Some(sol);
        }
        // a repeated point means the LP cannot resolve the gap any further
        if grid.iter().any(|&g| (g - argmax).abs() <= 4.0 * f64::EPSILON * problem.rho) {
            let mut best = best.expect("set above");
            best.iterations = iterations;
            return Err(ChebError::NotConverged { best });
        }
        grid.push(argmax);
    }
    let mut best = best.expect("at least one exchange iteration");
    best.iterations = max_exchanges;
    Err(ChebError::NotConverged { best })
}

/// `min max_{[0,rho]} |p|` over degree-`k` polynomials with `p(1) = 1`, `||p||_1 <= C`.
pub fn solve_ctr_cheb(problem: &MinimaxProblem, tol: f64) -> Result<MinimaxSolution, ChebError> {
    solve_ctr_cheb_with(problem, tol, DEFAULT_MAX_EXCHANGES)
}

pub fn solve_ctr_cheb_with(problem: &MinimaxProblem, tol: f64, max_exchanges: usize) -> Result<MinimaxSolution, ChebError> {
    exchange(&MinimaxProblem { mode: Mode::Direct, ..*problem }, tol, max_exchanges)
}

/// Feasible polynomial closest to `p*` in sup norm; `value` is its own max on `[0, rho]`.
pub fn solve_projection_bound(problem: &MinimaxProblem, tol: f64) -> Result<MinimaxSolution, ChebError> {
    exchange(&MinimaxProblem { mode: Mode::Projection, ..*problem }, tol, DEFAULT_MAX_EXCHANGES)
}

/// Dispatches on `problem.mode`.
pub fn solve(problem: &MinimaxProblem, tol: f64) -> Result<MinimaxSolution, ChebError> {
    exchange(problem, tol, DEFAULT_MAX_EXCHANGES)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomials::{l1_norm, max_abs};
    use crate::rates::{c_star, rho_star, RateParams};

    #[test]
    fn unit_budget_gives_monomial() {
        let s = solve_ctr_cheb(&MinimaxProblem::direct(0.9, 3, 1.0), 1e-8).unwrap();
        assert!((s.value - 0.729).abs() < 1e-10);
        let c = s.poly.coeffs();
        assert!((c[3] - 1.0).abs() < 1e-9 && c[..3].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn small_budget_closed_form() {
        let s = solve_ctr_cheb(&MinimaxProblem::direct(0.9, 3, 1.5), DEFAULT_TOL).unwrap();
        assert!((s.value - 0.66125).abs() < 1e-4, "{}", s.value);
        assert!(s.certified_gap <= DEFAULT_TOL);
    }

    #[test]
    fn fixed_grid_example() {
        let grid: Vec<f64> = (0..200).map(|j| 0.9 * j as f64 / 199.0).collect();
        let (_, t) = solve_on_grid(&MinimaxProblem::direct(0.9, 3, 1.5), &grid).unwrap();
        assert!((t - 0.66125).abs() < 1e-3);
    }

    #[test]
    fn saturated_budget() {
        let pr = RateParams::new(0.9, 5).unwrap();
        let s = solve_ctr_cheb(&MinimaxProblem::direct(0.9, 5, c_star(&pr) * 1.01), DEFAULT_TOL).unwrap();
        assert!((s.value - rho_star(&pr)).abs() < 1e-5);
    }

    #[test]
    fn solution_feasibility() {
        for c in [1.0, 1.2, 3.0, 20.0] {
            let s = solve_ctr_cheb(&MinimaxProblem::direct(0.9, 4, c), DEFAULT_TOL).unwrap();
            assert!((s.poly.eval(1.0) - 1.0).abs() < 1e-9);
            assert!(l1_norm(&s.poly) <= c * (1.0 + 1e-9));
            assert!(max_abs(&s.poly, 0.0, 0.9).unwrap().0 <= s.value + s.certified_gap + 1e-12);
        }
    }

    #[test]
    fn projection_above_direct() {
        for c in [1.0, 2.0, 10.0] {
            let d = solve_ctr_cheb(&MinimaxProblem::direct(0.9, 3, c), DEFAULT_TOL).unwrap();
            let p = solve_projection_bound(&MinimaxProblem::direct(0.9, 3, c), DEFAULT_TOL).unwrap();
            assert!(p.value >= d.value - DEFAULT_TOL);
            assert!(l1_norm(&p.poly) <= c * (1.0 + 1e-9));
        }
    }

    #[test]
    fn projection_recovers_p_star() {
        let pr = RateParams::new(0.9, 3).unwrap();
        let p = solve_projection_bound(&MinimaxProblem::direct(0.9, 3, c_star(&pr) * 1.1), DEFAULT_TOL).unwrap();
        assert!((p.value - rho_star(&pr)).abs() < 1e-5);
    }

    #[test]
    fn infeasible_budget() {
        assert_eq!(solve_ctr_cheb(&MinimaxProblem::direct(0.9, 3, 0.5), 1e-6), Err(ChebError::Infeasible(0.5)));
        assert!(matches!(
            solve_ctr_cheb(&MinimaxProblem::direct(1.5, 3, 2.0), 1e-6),
            Err(ChebError::Argument(_))
        ));
    }

    #[test]
    fn exchange_cap_reports_best() {
        let r = solve_ctr_cheb_with(&MinimaxProblem::direct(0.9, 5, 5.0), 1e-15, 1);
        match r {
            Err(ChebError::NotConverged { best }) => {
                assert_eq!(best.iterations, 1);
                assert!((best.poly.eval(1.0) - 1.0).abs() < 1e-9);
            }
            Ok(s) => assert!(s.certified_gap <= 1e-15),
            Err(e) => panic!("unexpected {e}"),
        }
    }
}
