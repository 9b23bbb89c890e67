//! One constrained Anderson extrapolation step and the guarded outer loop.

use crate::error::argument;
use crate::lsq::{scaled_norm, solve_weights, ExtrapolationWeights, LsqError, ResidualMatrix, DEFAULT_REL_TOL};
use crate::operators::OperatorSpec;
use nalgebra::DVector;
use thiserror::Error;

/// Budget used for the unconstrained variant. Large enough never to bind on
/// well-posed windows while keeping the vertex formula finite.
pub const UNCONSTRAINED_C: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Bounded(f64),
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaaConfig {
    pub k: usize,
    pub budget: Budget,
    pub rel_tol: f64,
}

impl CaaConfig {
    pub fn new(k: usize, c: f64) -> Self {
        Self { k, budget: Budget::Bounded(c), rel_tol: DEFAULT_REL_TOL }
    }

    pub fn unconstrained(k: usize) -> Self {
        Self { k, budget: Budget::Unconstrained, rel_tol: DEFAULT_REL_TOL }
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    /// The l1 budget handed to the weight solver.
    pub fn c(&self) -> f64 {
        match self.budget {
            Budget::Bounded(c) => c,
            Budget::Unconstrained => UNCONSTRAINED_C,
        }
    }

    fn validate(&self) -> crate::Result<()> {
        if self.k == 0 {
            return Err(argument("k must be >= 1"));
        }
        let c = self.c();
        if !(c >= 1.0) || !c.is_finite() {
            return Err(argument(format!("budget C must be finite and >= 1, got {c}")));
        }
        if !(self.rel_tol > 0.0) {
            return Err(argument(format!("rel_tol must be > 0, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    /// `x_0, ..., x_{k+1}`, or just `x_0, x_1` when `x_0` is a fixed point.
    pub iterates: Vec<DVector<f64>>,
    pub weights: ExtrapolationWeights,
    pub x_e: DVector<f64>,
    pub residual_in: f64,
    pub residual_out: f64,
    pub ratio: f64,
    /// False when the weight solver hit its iteration cap and its best
    /// feasible weights were used instead.
    pub subproblem_converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guard {
    Extrapolated,
    Fallback,
}

impl Guard {
    pub fn as_str(self) -> &'static str {
        match self {
            Guard::Extrapolated => "extrapolated",
            Guard::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub outer: usize,
    pub grad_norm: f64,
    pub guard: Guard,
    pub coeff_l1: f64,
    /// `grad_norm / previous grad_norm`.
    pub rate_estimate: f64,
    pub subproblem_converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// All `N` outer iterations ran.
    Completed,
    /// The gradient norm reached zero or `grad_tol`.
    Converged,
    /// The computed guard norm failed the `rho^k` contraction that holds in
    /// exact arithmetic, so the iterates are at working precision. The
    /// offending step is not applied.
    RoundingFloor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub initial_grad_norm: f64,
    pub records: Vec<OuterRecord>,
    pub x_final: DVector<f64>,
    pub stop: StopReason,
}

impl RunTrace {
    pub fn stopped_early(&self) -> bool {
        self.stop != StopReason::Completed
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaaError {
    #[error(transparent)]
    Argument(#[from] crate::Error),
    #[error("weight subproblem failed: {0}")]
    Subproblem(LsqError),
    #[error("non-finite iterate after {} operator applications", .iterates.len().saturating_sub(1))]
    Divergence {
        iterates: Vec<DVector<f64>>,
        partial_run: Option<Box<RunTrace>>,
    },
}

/// `||F(x) - x||`.
pub fn residual(op: &OperatorSpec, x: &DVector<f64>) -> f64 {
    scaled_norm(&(op.apply(x) - x))
}

fn check_start(op: &OperatorSpec, x0: &DVector<f64>) -> crate::Result<()> {
    if x0.len() != op.dim() {
        return Err(argument(format!("x0 has dimension {}, operator has {}", x0.len(), op.dim())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(argument("x0 has non-finite entries"));
    }
    Ok(())
}

fn finite(x: &DVector<f64>) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Runs `k + 1` applications of `F` from `x0` and extrapolates them.
pub fn caa_step(op: &OperatorSpec, x0: &DVector<f64>, cfg: &CaaConfig) -> Result<StepTrace, CaaError> {
    cfg.validate()?;
    check_start(op, x0)?;
    let mut iterates = Vec::with_capacity(cfg.k + 2);
    iterates.push(x0.clone());
    let x1 = op.apply(x0);
    let finite_x1 = finite(&x1);
    iterates.push(x1);
    if !finite_x1 {
        return Err(CaaError::Divergence { iterates, partial_run: None });
    }
    let residual_in = scaled_norm(&(&iterates[1] - x0));
    if residual_in == 0.0 {
        let mut c = DVector::zeros(cfg.k + 1);
        c[0] = 1.0;
        let weights = ExtrapolationWeights { c, l1: 1.0, residual_norm: 0.0, gap: 0.0 };
        return Ok(StepTrace {
            iterates,
            weights,
            x_e: x0.clone(),
            residual_in,
            residual_out: 0.0,
            ratio: 0.0,
            subproblem_converged: true,
        });
    }
    extrapolate(op, iterates, cfg, residual_in)
}

fn extrapolate(op: &OperatorSpec, mut iterates: Vec<DVector<f64>>, cfg: &CaaConfig, residual_in: f64) -> Result<StepTrace, CaaError> {
    while iterates.len() < cfg.k + 2 {
        let next = op.apply(iterates.last().expect("non-empty"));
        let ok = finite(&next);
        iterates.push(next);
        if !ok {
            return Err(CaaError::Divergence { iterates, partial_run: None });
        }
    }
    let r = ResidualMatrix::from_iterates(&iterates)?;
    let (weights, subproblem_converged) = match solve_weights(&r, cfg.c(), cfg.rel_tol) {
        Ok(w) => (w, true),
        Err(LsqError::NotConverged { best, .. }) => (best, false),
        Err(e) => return Err(CaaError::Subproblem(e)),
    };
    let mut x_e = DVector::zeros(iterates[0].len());
    for (ci, xi) in weights.c.iter().zip(&iterates) {
        x_e.axpy(*ci, xi, 1.0);
    }
    let residual_out = residual(op, &x_e);
    Ok(StepTrace {
        ratio: residual_out / residual_in,
        iterates,
        weights,
        x_e,
        residual_in,
        residual_out,
        subproblem_converged,
    })
}

/// Relative slack allowed on the `rho^k` contraction before a step is
/// attributed to rounding.
pub const CONTRACTION_SLACK: f64 = 1e-12;

/// Options of the guarded loop beyond the CAA configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardOptions {
    /// Stop once the gradient norm drops to this value or below.
    pub grad_tol: f64,
    /// Stop at the rounding floor (see [`StopReason::RoundingFloor`]). Only
    /// active when the operator's `rho` lies in `(0, 1)`.
    pub floor_check: bool,
}

impl Default for GuardOptions {
    fn default() -> Self {
        Self { grad_tol: 0.0, floor_check: true }
    }
}

/// Norm used by the guard: `||grad f(x)||` for gradient steps, otherwise
/// `||F(x) - x||`.
pub fn guard_norm(op: &OperatorSpec, x: &DVector<f64>) -> f64 {
    match op.gradient(x) {
        Some(g) => scaled_norm(&g),
        None => residual(op, x),
    }
}

/// Algorithm 2: `N` outer iterations, each running `k + 1` steps of `F` from
/// the current point, extrapolating, and keeping whichever of the
/// extrapolated point and the `k`-th inner iterate has the smaller gradient.
pub fn guarded_caa(op: &OperatorSpec, x0: &DVector<f64>, cfg: &CaaConfig, n_outer: usize) -> Result<RunTrace, CaaError> {
    guarded_caa_with(op, x0, cfg, n_outer, GuardOptions::default())
}

pub fn guarded_caa_with(
    op: &OperatorSpec,
    x0: &DVector<f64>,
    cfg: &CaaConfig,
    n_outer: usize,
    opts: GuardOptions,
) -> Result<RunTrace, CaaError> {
    cfg.validate()?;
    check_start(op, x0)?;
    if n_outer == 0 {
        return Err(argument("N must be >= 1").into());
    }
    let initial = guard_norm(op, x0);
    let mut trace =
        RunTrace { initial_grad_norm: initial, records: Vec::new(), x_final: x0.clone(), stop: StopReason::Completed };
    let rho = op.meta.rho;
    let contraction = (opts.floor_check && rho > 0.0 && rho < 1.0).then(|| rho.powi(cfg.k as i32));
    let mut x = x0.clone();
    let mut g_prev = initial;
    if g_prev == 0.0 || g_prev <= opts.grad_tol {
        trace.stop = StopReason::Converged;
        return Ok(trace);
    }
    for outer in 1..=n_outer {
        let x1 = op.apply(&x);
        let r0 = scaled_norm(&(&x1 - &x));
        let iterates = vec![x.clone(), x1];
        let step = if r0 == 0.0 {
            None
        } else {
            match extrapolate(op, iterates, cfg, r0) {
                Ok(s) => Some(s),
                Err(CaaError::Divergence { iterates, .. }) => {
                    return Err(CaaError::Divergence { iterates, partial_run: Some(Box::new(trace)) });
                }
                Err(e) => return Err(e),
            }
        };
        let Some(step) = step else {
            trace.stop = StopReason::Converged;
            break;
        };
        let x_k = &step.iterates[cfg.k];
        let g_k = guard_norm(op, x_k);
        let g_e = if finite(&step.x_e) { guard_norm(op, &step.x_e) } else { f64::INFINITY };
        let (next, g_next, guard) =
            if g_e < g_k { (step.x_e.clone(), g_e, Guard::Extrapolated) } else { (x_k.clone(), g_k, Guard::Fallback) };
        if contraction.is_some_and(|rk| g_next > rk * g_prev * (1.0 + CONTRACTION_SLACK)) {
            trace.stop = StopReason::RoundingFloor;
            break;
        }
        trace.records.push(OuterRecord {
            outer,
            grad_norm: g_next,
            guard,
            coeff_l1: step.weights.l1,
            rate_estimate: g_next / g_prev,
            subproblem_converged: step.subproblem_converged,
        });
        x = next;
        g_prev = g_next;
        if g_next == 0.0 || g_next <= opts.grad_tol {
            if outer < n_outer {
                trace.stop = StopReason::Converged;
            }
            break;
        }
    }
    trace.x_final = x;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{make_gradient_step, FixedPointMap, GradientFamily, OperatorMeta};
    use nalgebra::DMatrix;
    use std::sync::Arc;

    struct Diag(DMatrix<f64>);

    impl FixedPointMap for Diag {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
            &self.0 * x
        }
    }

    fn diag_op(d: &[f64]) -> OperatorSpec {
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(d));
        let rho = d.iter().cloned().fold(0.0, f64::max);
        OperatorSpec::new(Arc::new(Diag(m)), "diag", OperatorMeta { rho, ..Default::default() }, Some(DVector::zeros(d.len())))
    }

    #[test]
    fn zero_map_converges_in_one_step() {
        let op = make_gradient_step(&GradientFamily::Quadratic { n: 4, mu: 1.0, l: 1.0, rotate: false }, 0).unwrap();
        let s = caa_step(&op, &DVector::from_element(4, 1.0), &CaaConfig::new(3, 2.0)).unwrap();
        assert_eq!(s.residual_out, 0.0);
        assert_eq!(s.weights.c[0], 0.0);
    }

    #[test]
    fn two_dimensional_line_search() {
        // minimise ||c0 (x0 - x1) + (1 - c0)(x1 - x2)|| by hand
        let op = diag_op(&[0.9, 0.5]);
        let x0 = DVector::from_vec(vec![1.0, 1.0]);
        let s = caa_step(&op, &x0, &CaaConfig::new(1, 3.1)).unwrap();
        let r0 = [0.1, 0.5];
        let r1 = [0.09, 0.25];
        let d = [r0[0] - r1[0], r0[1] - r1[1]];
        let c0 = -(r1[0] * d[0] + r1[1] * d[1]) / (d[0] * d[0] + d[1] * d[1]);
        assert!((s.weights.c[0] - c0).abs() < 1e-8, "{} vs {c0}", s.weights.c[0]);
        assert!((c0 + 1.0128).abs() < 1e-4);
    }

    #[test]
    fn fixed_point_returns_early() {
        let zero = diag_op(&[0.5, 0.5]);
        let s = caa_step(&zero, &DVector::zeros(2), &CaaConfig::new(3, 5.0)).unwrap();
        assert_eq!((s.ratio, s.residual_out, s.iterates.len()), (0.0, 0.0, 2));
    }

    #[test]
    fn residual_examples() {
        let op = diag_op(&[0.5, 0.5, 0.5]);
        let x = DVector::from_vec(vec![1.0, 2.0, 2.0]);
        assert!((residual(&op, &x) - 1.5).abs() < 1e-15);
        let q = make_gradient_step(&GradientFamily::Quadratic { n: 3, mu: 0.2, l: 2.0, rotate: true }, 1).unwrap();
        let g = q.gradient(&x).unwrap().norm();
        assert!((residual(&q, &x) - g / 2.0).abs() <= 1e-12 * g);
    }

    #[test]
    fn divergence_reported() {
        struct Blowup;
        impl FixedPointMap for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
                x * 1e300
            }
        }
        let op = OperatorSpec::new(Arc::new(Blowup), "blowup", OperatorMeta::default(), None);
        let e = caa_step(&op, &DVector::from_element(1, 1.0), &CaaConfig::new(3, 2.0)).unwrap_err();
        match e {
            CaaError::Divergence { iterates, .. } => assert_eq!(iterates.len(), 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn bad_config_rejected() {
        let op = diag_op(&[0.5]);
        let x = DVector::from_element(1, 1.0);
        assert!(caa_step(&op, &x, &CaaConfig::new(0, 2.0)).is_err());
        assert!(caa_step(&op, &x, &CaaConfig::new(2, 0.5)).is_err());
        assert!(caa_step(&op, &DVector::from_element(2, 1.0), &CaaConfig::new(2, 2.0)).is_err());
        assert!(guarded_caa(&op, &x, &CaaConfig::new(2, 2.0), 0).is_err());
    }

    #[test]
    fn guarded_quadratic_hits_floor() {
        let fam = GradientFamily::Quadratic { n: 5, mu: 0.1, l: 1.0, rotate: true };
        let op = make_gradient_step(&fam, 3).unwrap();
        let x0 = DVector::from_vec(vec![1.0, -1.0, 0.5, 2.0, 0.1]);
        let t = guarded_caa(&op, &x0, &CaaConfig::unconstrained(5), 3).unwrap();
        assert!(t.records[0].grad_norm <= 1e-10 * t.initial_grad_norm);
        assert_eq!(t.records[0].guard, Guard::Extrapolated);
    }
}
