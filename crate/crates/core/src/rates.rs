//! Closed-form convergence rates, l1 budgets and acceleration thresholds.
//!
//! Notation: `rho` is the contraction factor of the fixed-point map, `k + 1`
//! iterates enter each extrapolation, and `C` bounds the l1 norm of the
//! extrapolation weights (equivalently of the polynomial coefficients).

use crate::error::{argument, domain, Result};
use crate::polynomials::{l1_norm, rescaled_cheb};
use std::f64::consts::PI;

/// Contraction factor and window size, validated on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    rho: f64,
    k: usize,
}

impl RateParams {
    pub fn new(rho: f64, k: usize) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(argument(format!("rho must lie in (0, 1), got {rho}")));
        }
        if k == 0 {
            return Err(argument("k must be at least 1"));
        }
        Ok(Self { rho, k })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `rho^k`, the guaranteed decay of `k` plain fixed-point steps.
    pub fn rho_pow_k(&self) -> f64 {
        self.rho.powi(self.k as i32)
    }

    fn kf(&self) -> f64 {
        self.k as f64
    }
}

/// `(1 - sqrt(1 - r)) / (1 + sqrt(1 - r))`.
fn beta_of(r: f64) -> f64 {
    let s = (1.0 - r).max(0.0).sqrt();
    (1.0 - s) / (1.0 + s)
}

/// `2 beta^k / (1 + beta^{2k})`.
fn cheb_value(beta: f64, k: usize) -> f64 {
    let bk = beta.powi(k as i32);
    2.0 * bk / (1.0 + bk * bk)
}

/// Optimal unconstrained Chebyshev value on `[0, rho]` with `p(1) = 1`.
pub fn rho_star(params: &RateParams) -> f64 {
    cheb_value(beta_of(params.rho), params.k)
}

/// Largest `eps` for which the minimax polynomial on `[-eps, rho]` keeps all
/// its roots in `[0, rho]`.
pub fn eps_tilde(params: &RateParams) -> f64 {
    let k = params.kf();
    let c = ((2.0 * k - 1.0) / (2.0 * k) * PI).cos();
    // cos((2k-1)pi/2k) is exactly 0 for k = 1 in exact arithmetic.
    let c = if params.k == 1 { 0.0 } else { c };
    params.rho * (1.0 + c) / (1.0 - c)
}

/// Minimax value of the normalised Chebyshev polynomial on `[-eps, rho]`.
pub fn rho_eps(rho: f64, eps: f64, k: usize) -> Result<f64> {
    let params = RateParams::new(rho, k)?;
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(argument(format!("eps must be finite and >= 0, got {eps}")));
    }
    let r = (params.rho + eps) / (1.0 + eps);
    Ok(cheb_value(beta_of(r), params.k))
}

/// Closed-form l1 norm of the rescaled Chebyshev polynomial on `[-eps, rho]`,
/// valid while its coefficients alternate in sign (`eps <= eps_tilde`).
pub fn p_eps_l1(rho: f64, eps: f64, k: usize) -> Result<f64> {
    let params = &RateParams::new(rho, k)?;
    let et = eps_tilde(params);
    if !(eps >= 0.0) || eps > et * (1.0 + 1e-12) {
        return Err(domain(format!(
            "l1 closed form needs 0 <= eps <= eps_tilde = {et}, got {eps}"
        )));
    }
    let k = k as i32;
    let root = 2.0 * ((1.0 + rho) * (1.0 - eps)).sqrt();
    let base = 2.0 + rho - eps;
    let value = rho_eps(rho, eps, params.k)?;
    Ok(value / 2.0 * (1.0 / (rho + eps)).powi(k) * ((base - root).powi(k) + (base + root).powi(k)))
}

/// l1 norm of the unconstrained optimal polynomial; beyond it the budget is inactive.
pub fn c_star(params: &RateParams) -> f64 {
    let rho = params.rho;
    let k = params.k as i32;
    let root = 2.0 * (1.0 + rho).sqrt();
    rho_star(params) / (2.0 * params.rho_pow_k()) * ((2.0 + rho - root).powi(k) + (2.0 + rho + root).powi(k))
}

/// Right end of the interval on which the constrained value is known exactly.
pub fn c0(params: &RateParams) -> f64 {
    let rk = params.rho_pow_k();
    (2.0 + rk) / (2.0 - rk)
}

/// Constrained value at [`c0`], namely `rho^k / (2 - rho^k)`.
pub fn rho0(params: &RateParams) -> f64 {
    let rk = params.rho_pow_k();
    rk / (2.0 - rk)
}

/// Budget and rate of the polynomial `rho_1 T_k(x / rho)` (the rescaling with `eps = rho`).
///
/// The coefficients of this polynomial are parity-sparse, so its l1 norm is
/// `|rho_1 T_k(i / rho)|` rather than an evaluation at `-1`.
pub fn c1_rho1(params: &RateParams) -> (f64, f64) {
    let rho = params.rho;
    let k = params.k as i32;
    let beta = ((1.0 + rho).sqrt() - (1.0 - rho).sqrt()) / ((1.0 + rho).sqrt() + (1.0 - rho).sqrt());
    let rho1 = cheb_value(beta, params.k);
    let root = (1.0 + rho * rho).sqrt();
    let c1 = rho1 / (2.0 * params.rho_pow_k()) * ((1.0 - root).powi(k) + (1.0 + root).powi(k));
    (c1, rho1)
}

/// Exact constrained value for small budgets `1 <= C <= c0`.
pub fn tilde_rho_small_c(params: &RateParams, c: f64) -> Result<f64> {
    let hi = c0(params);
    if !(c >= 1.0 && c <= hi) {
        return Err(domain(format!("small-budget formula needs 1 <= C <= {hi}, got {c}")));
    }
    Ok((c + 1.0) / 2.0 * params.rho_pow_k() - (c - 1.0) / 2.0)
}

/// Chord between the budget-1 value `rho^k` and the saturated value `rho*`,
/// the coarse bound implied by convexity of the constrained value.
pub fn lemma1_chord(params: &RateParams, c: f64) -> Result<f64> {
    if !(c >= 1.0) {
        return Err(domain(format!("budget C must be >= 1, got {c}")));
    }
    let cs = c_star(params);
    if c >= cs {
        return Ok(rho_star(params));
    }
    Ok(((cs - c) * params.rho_pow_k() + (c - 1.0) * rho_star(params)) / (cs - 1.0))
}

/// One knot of the piecewise-linear upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub c: f64,
    pub rho: f64,
}

/// Knots of the piecewise-linear bound, sorted by budget.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundKnots {
    pub knots: Vec<Knot>,
    pub m: usize,
    pub rho_star: f64,
}

/// Builds the knots `(1, rho^k)`, `(c0, rho0)`, `(C_i, rho_i)` for
/// `eps_i = rho / 2^(i-1)`, `i = 1..=m`, and `(C*, rho*)`.
///
/// `C_1` uses the parity closed form, `C_i` for `eps_i <= eps_tilde` the
/// alternating-sign closed form, and the remaining `C_i` the coefficient sum
/// of the rescaled Chebyshev polynomial.
pub fn global_bound(params: &RateParams, m: usize) -> Result<BoundKnots> {
    if params.k <= 2 {
        return Err(domain(format!("global bound requires k > 2, got k = {}", params.k)));
    }
    if m == 0 {
        return Err(argument("global bound needs M >= 1"));
    }
    let mut knots = vec![
        Knot { c: 1.0, rho: params.rho_pow_k() },
        Knot { c: c0(params), rho: rho0(params) },
    ];
    let (c1, rho1) = c1_rho1(params);
    knots.push(Knot { c: c1, rho: rho1 });
    let et = eps_tilde(params);
    for i in 2..=m {
        let eps = params.rho / 2f64.powi(i as i32 - 1);
        let c = if eps <= et {
            p_eps_l1(params.rho, eps, params.k)?
        } else {
            l1_norm(&rescaled_cheb(params.rho, eps, params.k)?)
        };
        knots.push(Knot { c, rho: rho_eps(params.rho, eps, params.k)? });
    }
    let rs = rho_star(params);
    knots.push(Knot { c: c_star(params), rho: rs });
    knots.sort_by(|a, b| a.c.total_cmp(&b.c));
    Ok(BoundKnots { knots, m, rho_star: rs })
}

/// Maximum over the knot chords (extended as lines) and `rho*`, evaluated at `c`.
pub fn evaluate_bound(knots: &BoundKnots, c: f64) -> Result<f64> {
    if !(c >= 1.0) {
        return Err(domain(format!("budget C must be >= 1, got {c}")));
    }
    let chords = knots.knots.windows(2).filter_map(|w| {
        let (lo, hi) = (w[0], w[1]);
        let width = hi.c - lo.c;
        (width > 0.0).then(|| ((c - lo.c) * hi.rho + (hi.c - c) * lo.rho) / width)
    });
    Ok(chords.fold(knots.rho_star, f64::max))
}

/// Rate bound for a perturbed linear map with perturbation Lipschitz constant `alpha`.
pub fn hat_rho(params: &RateParams, c: f64, alpha: f64, m: usize) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(argument(format!("alpha must be >= 0, got {alpha}")));
    }
    let bound = evaluate_bound(&global_bound(params, m)?, c)?;
    Ok(bound + 3.0 * alpha * params.kf() * c)
}

/// Rate bound for a gradient step with `eta`-Lipschitz Hessian, started where
/// the gradient norm is `grad_norm`.
pub fn hat_rho_grad(params: &RateParams, c: f64, eta: f64, l: f64, grad_norm: f64, m: usize) -> Result<f64> {
    if !(l > 0.0) {
        return Err(argument(format!("L must be > 0, got {l}")));
    }
    if !(eta >= 0.0 && grad_norm >= 0.0) {
        return Err(argument("eta and grad_norm must be >= 0"));
    }
    let bound = evaluate_bound(&global_bound(params, m)?, c)?;
    let k = params.kf();
    Ok(bound + 3.0 * eta / (l * l) * grad_norm * k * k * c * c)
}

/// Perturbation levels below which extrapolation provably beats `rho^k`
/// around `c0`, on `[c0, C_1]` and on `[c0, C*]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub around_c0: f64,
    pub up_to_c1: f64,
    pub up_to_c_star: f64,
}

fn nonneg(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Thresholds on `alpha` (alpha0, alpha1, alpha2).
pub fn alpha_thresholds(params: &RateParams) -> Thresholds {
    let rk = params.rho_pow_k();
    let k = params.kf();
    let a0 = nonneg(rk * (1.0 - rk) / (3.0 * k * (2.0 + rk)));
    let (c1, rho1) = c1_rho1(params);
    let a1 = a0.min(nonneg((rk - rho1) / (3.0 * k * c1)));
    let a2 = a0.min(nonneg((rk - rho_star(params)) / (3.0 * k * c_star(params))));
    Thresholds { around_c0: a0, up_to_c1: a1, up_to_c_star: a2 }
}

/// Thresholds on `eta / L^2 * ||grad f(x0)||` for gradient steps (alpha3, alpha4, alpha5).
pub fn grad_thresholds(params: &RateParams) -> Thresholds {
    let rk = params.rho_pow_k();
    let k = params.kf();
    let a3 = nonneg(rk * (1.0 - rk) * (2.0 - rk) / (3.0 * k * k * (2.0 + rk).powi(2)));
    let (c1, rho1) = c1_rho1(params);
    let a4 = a3.min(nonneg((rk - rho1) / (3.0 * k * k * c1 * c1)));
    let cs = c_star(params);
    let a5 = a3.min(nonneg((rk - rho_star(params)) / (3.0 * k * k * cs * cs)));
    Thresholds { around_c0: a3, up_to_c1: a4, up_to_c_star: a5 }
}

/// Number of guarded outer iterations after which the accumulated bound beats
/// `rho^{kN}`. Non-positive means immediately; `-inf` when `eta * grad_norm0 = 0`.
pub fn n_threshold(params: &RateParams, eta: f64, l: f64, grad_norm0: f64) -> Result<f64> {
    if !(l > 0.0) {
        return Err(argument(format!("L must be > 0, got {l}")));
    }
    if !(eta >= 0.0 && grad_norm0 >= 0.0) {
        return Err(argument("eta and grad_norm0 must be >= 0"));
    }
    let rk = params.rho_pow_k();
    let k = params.kf();
    let arg = eta / (l * l) * 3.0 * k * k * (2.0 + rk).powi(2) * grad_norm0 / (rk * (1.0 - rk) * (2.0 - rk));
    Ok(arg.ln() / (k * (1.0 / params.rho).ln()))
}
