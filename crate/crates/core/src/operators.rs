//! Contractive fixed-point maps with known constants.
//!
//! Three kinds of operator are provided, all reproducible from a seed:
//!
//! - linear contractions `F(x) = G x + b` with `G` symmetric PSD of given spectrum;
//! - the same maps plus a smooth perturbation `alpha * sin(x + phi)`, whose
//!   Lipschitz constant is exactly `alpha`;
//! - gradient steps `F(x) = x - grad f(x) / L` on strongly convex objectives
//!   (quadratics, quadratics plus a cubic-growth separable term with exact
//!   Hessian-Lipschitz constant `eta`, and ridge-regularised logistic regression).

use crate::error::{argument, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::fmt;
use std::sync::Arc;

/// A map `R^n -> R^n`, optionally the gradient step of a smooth objective.
pub trait FixedPointMap: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;
    fn gradient(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }
    fn objective(&self, _x: &DVector<f64>) -> Option<f64> {
        None
    }
}

/// Constants attached to an operator. Zero means "not applicable".
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OperatorMeta {
    /// Lipschitz constant of `F`.
    pub rho: f64,
    pub mu: f64,
    pub l: f64,
    pub eta: f64,
    /// Lipschitz constant of the nonlinear part of `F`.
    pub alpha: f64,
}

#[derive(Clone)]
pub struct OperatorSpec {
    map: Arc<dyn FixedPointMap>,
    pub name: String,
    pub meta: OperatorMeta,
    pub fixed_point: Option<DVector<f64>>,
}

impl fmt::Debug for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorSpec")
            .field("name", &self.name)
            .field("n", &self.dim())
            .field("meta", &self.meta)
            .finish()
    }
}

impl OperatorSpec {
    pub fn new(map: Arc<dyn FixedPointMap>, name: impl Into<String>, meta: OperatorMeta, fixed_point: Option<DVector<f64>>) -> Self {
        Self { map, name: name.into(), meta, fixed_point }
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.map.apply(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.map.gradient(x)
    }

    pub fn objective(&self, x: &DVector<f64>) -> Option<f64> {
        self.map.objective(x)
    }

    pub fn has_gradient(&self) -> bool {
        self.map.gradient(&DVector::zeros(self.dim())).is_some()
    }

    /// `F'(x) = F(x - s) + s`, whose fixed point is shifted by `s`.
    pub fn translated(&self, s: DVector<f64>) -> Self {
        let fixed_point = self.fixed_point.as_ref().map(|p| p + &s);
        let map = Arc::new(Translated { inner: self.map.clone(), shift: s });
        Self { map, name: format!("{}+shift", self.name), meta: self.meta, fixed_point }
    }
}

struct Translated {
    inner: Arc<dyn FixedPointMap>,
    shift: DVector<f64>,
}

impl FixedPointMap for Translated {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner.apply(&(x - &self.shift)) + &self.shift
    }

    fn gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.inner.gradient(&(x - &self.shift))
    }

    fn objective(&self, x: &DVector<f64>) -> Option<f64> {
        self.inner.objective(&(x - &self.shift))
    }
}

/// Seeded generator used by every constructor.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vector(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix from the QR factorisation of a Gaussian matrix.
pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn symmetric_from_spectrum(rng: &mut impl Rng, spectrum: &[f64]) -> DMatrix<f64> {
    let n = spectrum.len();
    let q = random_orthogonal(rng, n);
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(spectrum));
    let g = &q * d * q.transpose();
    // symmetrise away rounding
    (&g + g.transpose()) * 0.5
}

fn check_spectrum(spectrum: &[f64]) -> Result<f64> {
    if spectrum.is_empty() {
        return Err(argument("spectrum must be non-empty"));
    }
    if let Some(v) = spectrum.iter().find(|v| !(**v >= 0.0 && **v < 1.0)) {
        return Err(argument(format!("spectrum values must lie in [0, 1), got {v}")));
    }
    Ok(spectrum.iter().cloned().fold(0.0, f64::max))
}

struct Affine {
    g: DMatrix<f64>,
    b: DVector<f64>,
    alpha: f64,
    phase: DVector<f64>,
}

impl FixedPointMap for Affine {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = &self.g * x + &self.b;
        if self.alpha != 0.0 {
            for i in 0..y.len() {
                y[i] += self.alpha * (x[i] + self.phase[i]).sin();
            }
        }
        y
    }
}

/// `F(x) = Q diag(spectrum) Q^T x + b` with random `Q` and `b`.
pub fn make_linear(spectrum: &[f64], seed: u64) -> Result<OperatorSpec> {
    make_perturbed_linear(spectrum, 0.0, seed).map(|mut op| {
        op.name = "linear".into();
        op
    })
}

/// `F(x) = G x + b + alpha * sin(x + phi)` componentwise; `G` and `b` are the
/// same as [`make_linear`] with the same seed.
pub fn make_perturbed_linear(spectrum: &[f64], alpha: f64, seed: u64) -> Result<OperatorSpec> {
    let top = check_spectrum(spectrum)?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(argument(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let n = spectrum.len();
    let mut rng = rng(seed);
    let g = symmetric_from_spectrum(&mut rng, spectrum);
    let b = gaussian_vector(&mut rng, n);
    let phase = DVector::from_fn(n, |_, _| rng.random_range(0.0..std::f64::consts::TAU));
    let rho = top + alpha;
    let lin = DMatrix::identity(n, n) - &g;
    let x_lin = lin.clone().lu().solve(&b);
    let map = Affine { g, b, alpha, phase };
    let fixed_point = x_lin.and_then(|x0| if alpha == 0.0 { Some(x0) } else { newton_fixed_point(&map, x0) });
    let meta = OperatorMeta { rho, alpha, ..Default::default() };
    Ok(OperatorSpec::new(Arc::new(map), "perturbed_linear", meta, fixed_point))
}

fn newton_fixed_point(map: &Affine, mut x: DVector<f64>) -> Option<DVector<f64>> {
    let n = map.dim();
    for _ in 0..100 {
        let r = map.apply(&x) - &x;
        if r.norm() <= 1e-15 * (1.0 + x.norm()) {
            return Some(x);
        }
        let mut j = map.g.clone() - DMatrix::identity(n, n);
        for i in 0..n {
            j[(i, i)] += map.alpha * (x[i] + map.phase[i]).cos();
        }
        x -= j.lu().solve(&r)?;
    }
    let r = map.apply(&x) - &x;
    (r.norm() <= 1e-12 * (1.0 + x.norm())).then_some(x)
}

/// Objectives for the gradient-step families.
#[derive(Debug, Clone, PartialEq)]
pub enum GradientFamily {
    /// `f = x^T H x / 2`, spectrum of `H` in `[mu, L]` with both ends attained.
    Quadratic { n: usize, mu: f64, l: f64, rotate: bool },
    /// `f = x^T H x / 2 + eta * sum psi(x_i)` where `psi'' = min(|t|, tau)`, so
    /// `psi = |t|^3 / 6` near zero. `H` has spectrum in `[mu, L - eta tau]`,
    /// which keeps `f` `mu`-strongly convex and `L`-smooth, and the Hessian is
    /// exactly `eta`-Lipschitz.
    CubicPerturbedQuadratic { n: usize, mu: f64, l: f64, eta: f64, tau: f64, rotate: bool },
    /// `(1/m) sum log(1 + exp(-y_i a_i^T w)) + lambda ||w||^2 / 2` on Gaussian data.
    LogisticRidge { n: usize, m: usize, lambda: f64 },
}

enum Hess {
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

impl Hess {
    fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Hess::Diagonal(d) => d.component_mul(x),
            Hess::Dense(h) => h * x,
        }
    }
}

struct QuadraticPlusCubic {
    h: Hess,
    eta: f64,
    tau: f64,
}

/// `psi(t)` with `psi'' = min(|t|, tau)` and `psi(0) = psi'(0) = 0`.
fn psi(t: f64, tau: f64) -> f64 {
    let a = t.abs();
    if a <= tau {
        a * a * a / 6.0
    } else {
        let e = a - tau;
        tau * tau * tau / 6.0 + tau * tau / 2.0 * e + tau * e * e / 2.0
    }
}

fn psi_prime(t: f64, tau: f64) -> f64 {
    let a = t.abs();
    let v = if a <= tau { a * a / 2.0 } else { tau * a - tau * tau / 2.0 };
    v.copysign(t)
}

impl QuadraticPlusCubic {
    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = self.h.mul(x);
        if self.eta != 0.0 {
            for i in 0..g.len() {
                g[i] += self.eta * psi_prime(x[i], self.tau);
            }
        }
        g
    }
}

struct GradientStep<F> {
    f: F,
    n: usize,
    l: f64,
}

trait Smooth: Send + Sync {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn grad(&self, x: &DVector<f64>) -> DVector<f64>;
}

impl Smooth for QuadraticPlusCubic {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let mut v = 0.5 * x.dot(&self.h.mul(x));
        if self.eta != 0.0 {
            v += self.eta * x.iter().map(|&t| psi(t, self.tau)).sum::<f64>();
        }
        v
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        QuadraticPlusCubic::grad(self, x)
    }
}

struct Logistic {
    a: DMatrix<f64>,
    y: DVector<f64>,
    lambda: f64,
}

fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Smooth for Logistic {
    fn value(&self, w: &DVector<f64>) -> f64 {
        let m = self.a.nrows() as f64;
        let margins = (&self.a * w).component_mul(&self.y);
        margins.iter().map(|&t| log1p_exp(-t)).sum::<f64>() / m + 0.5 * self.lambda * w.norm_squared()
    }

    fn grad(&self, w: &DVector<f64>) -> DVector<f64> {
        let m = self.a.nrows() as f64;
        let margins = (&self.a * w).component_mul(&self.y);
        let s = DVector::from_fn(margins.len(), |i, _| -self.y[i] * sigmoid(-margins[i]));
        self.a.transpose() * s / m + w * self.lambda
    }
}

impl Logistic {
    fn hessian(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let m = self.a.nrows() as f64;
        let margins = (&self.a * w).component_mul(&self.y);
        let d = DVector::from_fn(margins.len(), |i, _| {
            let s = sigmoid(margins[i]);
            s * (1.0 - s) / m
        });
        let ad = DMatrix::from_fn(self.a.nrows(), self.a.ncols(), |i, j| self.a[(i, j)] * d[i]);
        self.a.transpose() * ad + DMatrix::identity(self.a.ncols(), self.a.ncols()) * self.lambda
    }
}

impl<F: Smooth> FixedPointMap for GradientStep<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        x - self.f.grad(x) / self.l
    }

    fn gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(self.f.grad(x))
    }

    fn objective(&self, x: &DVector<f64>) -> Option<f64> {
        Some(self.f.value(x))
    }
}

/// Spectrum in `[lo, hi]` with both endpoints attained and the rest uniform.
pub fn spread_spectrum(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut s: Vec<f64> = (0..n)
        .map(|i| match i {
            0 => lo,
            1 => hi,
            _ => rng.random_range(lo..=hi),
        })
        .collect();
    s.sort_by(f64::total_cmp);
    s
}

fn check_mu_l(mu: f64, l: f64) -> Result<()> {
    if !(mu > 0.0) || !(mu <= l) || !l.is_finite() {
        return Err(argument(format!("need 0 < mu <= L, got mu = {mu}, L = {l}")));
    }
    Ok(())
}

/// Gradient-step operator `x - grad f(x) / L` for the given family.
pub fn make_gradient_step(family: &GradientFamily, seed: u64) -> Result<OperatorSpec> {
    let mut rng = rng(seed);
    match *family {
        GradientFamily::Quadratic { n, mu, l, rotate } => {
            check_mu_l(mu, l)?;
            if n == 0 {
                return Err(argument("dimension must be >= 1"));
            }
            let spec = spread_spectrum(&mut rng, n, mu, l);
            let h = hessian(&mut rng, spec, rotate);
            let f = QuadraticPlusCubic { h, eta: 0.0, tau: 0.0 };
            let meta = OperatorMeta { rho: 1.0 - mu / l, mu, l, ..Default::default() };
            Ok(OperatorSpec::new(Arc::new(GradientStep { f, n, l }), "quadratic", meta, Some(DVector::zeros(n))))
        }
        GradientFamily::CubicPerturbedQuadratic { n, mu, l, eta, tau, rotate } => {
            check_mu_l(mu, l)?;
            if n == 0 {
                return Err(argument("dimension must be >= 1"));
            }
            if !(eta >= 0.0 && tau > 0.0) {
                return Err(argument(format!("need eta >= 0 and tau > 0, got eta = {eta}, tau = {tau}")));
            }
            let (lo, hi) = (mu, l - eta * tau);
            if lo > hi {
                return Err(argument(format!("eta * tau = {} leaves no room in [mu, L]", eta * tau)));
            }
            let spec = spread_spectrum(&mut rng, n, lo, hi);
            let h = hessian(&mut rng, spec, rotate);
            let f = QuadraticPlusCubic { h, eta, tau };
            let meta = OperatorMeta { rho: 1.0 - mu / l, mu, l, eta, ..Default::default() };
            Ok(OperatorSpec::new(Arc::new(GradientStep { f, n, l }), "cubic", meta, Some(DVector::zeros(n))))
        }
        GradientFamily::LogisticRidge { n, m, lambda } => {
            if n == 0 || m == 0 {
                return Err(argument("need n >= 1 features and m >= 1 samples"));
            }
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(argument(format!("lambda must be > 0, got {lambda}")));
            }
            let a = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt());
            let w_true = gaussian_vector(&mut rng, n);
            let y = DVector::from_fn(m, |i, _| {
                let t = a.row(i).dot(&w_true.transpose()) + 0.5 * rng.sample::<f64, _>(StandardNormal);
                if t >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            });
            let mf = m as f64;
            let smax = a.clone().svd(false, false).singular_values.max();
            let l = lambda + smax * smax / (4.0 * mf);
            let cube: f64 = (0..m).map(|i| a.row(i).norm().powi(3)).sum();
            let eta = cube / (6.0 * 3f64.sqrt() * mf);
            let f = Logistic { a, y, lambda };
            let fixed_point = logistic_minimizer(&f, n);
            let meta = OperatorMeta { rho: 1.0 - lambda / l, mu: lambda, l, eta, ..Default::default() };
            Ok(OperatorSpec::new(Arc::new(GradientStep { f, n, l }), "logistic_ridge", meta, fixed_point))
        }
    }
}

fn hessian(rng: &mut impl Rng, spectrum: Vec<f64>, rotate: bool) -> Hess {
    if rotate {
        Hess::Dense(symmetric_from_spectrum(rng, &spectrum))
    } else {
        Hess::Diagonal(DVector::from_vec(spectrum))
    }
}

fn logistic_minimizer(f: &Logistic, n: usize) -> Option<DVector<f64>> {
    let mut w = DVector::zeros(n);
    for _ in 0..50 {
        let g = f.grad(&w);
        if g.norm() <= 1e-14 {
            return Some(w);
        }
        let step = f.hessian(&w).cholesky()?.solve(&g);
        w -= step;
    }
    (f.grad(&w).norm() <= 1e-12).then_some(w)
}

/// Lipschitz constant of the nonlinear part of a gradient step on the
/// `C`-ball reachable by extrapolation: `(eta / L^2) k C ||grad f(x0)||`.
pub fn alpha_gradient(eta: f64, l: f64, k: usize, c: f64, grad_norm0: f64) -> Result<f64> {
    if !(l > 0.0) {
        return Err(argument(format!("L must be > 0, got {l}")));
    }
    if !(eta >= 0.0 && c >= 0.0 && grad_norm0 >= 0.0) {
        return Err(argument("eta, C and grad_norm0 must be >= 0"));
    }
    Ok(eta / (l * l) * k as f64 * c * grad_norm0)
}

/// Scales `direction` so that the gradient norm at the returned point equals
/// `target`, by bisection on the scale. Maps without a gradient use the
/// residual norm `||F(x) - x||` instead.
pub fn point_with_gradient_norm(op: &OperatorSpec, direction: &DVector<f64>, target: f64) -> Result<DVector<f64>> {
    let center = op.fixed_point.clone().unwrap_or_else(|| DVector::zeros(op.dim()));
    let gnorm = |s: f64| -> f64 {
        let x = &center + direction * s;
        match op.gradient(&x) {
            Some(g) => g.norm(),
            None => (op.apply(&x) - &x).norm(),
        }
    };
    if !(target > 0.0) || direction.norm() == 0.0 {
        return Err(argument("need a positive target and a nonzero direction"));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut tries = 0;
    while gnorm(hi) < target {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(argument("gradient norm target unreachable along direction"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gnorm(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(&center + direction * (0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let q = random_orthogonal(&mut rng(1), 6);
        let err = (&q.transpose() * &q - DMatrix::identity(6, 6)).abs().max();
        assert!(err < 1e-12);
    }

    #[test]
    fn linear_fixed_point_and_rate() {
        let op = make_linear(&[0.5, 0.5, 0.5], 3).unwrap();
        let xs = op.fixed_point.clone().unwrap();
        assert!((op.apply(&xs) - &xs).norm() < 1e-12);
        let x0 = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let x1 = op.apply(&x0);
        let r0 = (&x1 - &x0).norm();
        let r1 = (op.apply(&x1) - &x1).norm();
        assert!((r1 / r0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_spectrum_is_constant() {
        let op = make_linear(&[0.0; 4], 9).unwrap();
        let x1 = op.apply(&DVector::from_element(4, 3.0));
        assert!((op.apply(&x1) - &x1).norm() < 1e-12);
    }

    #[test]
    fn spectrum_validation() {
        assert!(make_linear(&[0.5, 1.0], 0).is_err());
        assert!(make_linear(&[], 0).is_err());
        assert!(make_perturbed_linear(&[0.5], -1.0, 0).is_err());
    }

    #[test]
    fn zero_alpha_matches_linear() {
        let a = make_linear(&[0.1, 0.4, 0.8], 11).unwrap();
        let b = make_perturbed_linear(&[0.1, 0.4, 0.8], 0.0, 11).unwrap();
        let x = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        assert_eq!(a.apply(&x), b.apply(&x));
    }

    #[test]
    fn perturbed_fixed_point() {
        let op = make_perturbed_linear(&[0.2, 0.5, 0.7, 0.85], 0.05, 4).unwrap();
        assert!((op.meta.rho - 0.9).abs() < 1e-15);
        let xs = op.fixed_point.clone().unwrap();
        assert!((op.apply(&xs) - &xs).norm() < 1e-10);
    }

    #[test]
    fn unit_quadratic_is_zero_map() {
        let op = make_gradient_step(&GradientFamily::Quadratic { n: 3, mu: 1.0, l: 1.0, rotate: true }, 0).unwrap();
        let y = op.apply(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        assert!(y.norm() < 1e-12);
        assert_eq!(op.meta.rho, 0.0);
    }

    #[test]
    fn gradient_family_validation() {
        assert!(make_gradient_step(&GradientFamily::Quadratic { n: 3, mu: 0.0, l: 1.0, rotate: false }, 0).is_err());
        assert!(make_gradient_step(&GradientFamily::Quadratic { n: 3, mu: 2.0, l: 1.0, rotate: false }, 0).is_err());
        let bad = GradientFamily::CubicPerturbedQuadratic { n: 3, mu: 0.1, l: 1.0, eta: 10.0, tau: 1.0, rotate: false };
        assert!(make_gradient_step(&bad, 0).is_err());
    }

    #[test]
    fn psi_derivatives_are_consistent() {
        let tau = 0.3;
        for &t in &[-1.0, -0.3, -0.1, 0.0, 0.05, 0.3, 0.7] {
            let h = 1e-6;
            let fd = (psi(t + h, tau) - psi(t - h, tau)) / (2.0 * h);
            assert!((fd - psi_prime(t, tau)).abs() < 1e-8);
            let fd2 = (psi_prime(t + h, tau) - psi_prime(t - h, tau)) / (2.0 * h);
            assert!((fd2 - t.abs().min(tau)).abs() < 1e-6);
        }
    }

    #[test]
    fn logistic_fixed_point() {
        let op = make_gradient_step(&GradientFamily::LogisticRidge { n: 5, m: 40, lambda: 0.1 }, 2).unwrap();
        let w = op.fixed_point.clone().unwrap();
        assert!(op.gradient(&w).unwrap().norm() < 1e-12);
        assert!(op.meta.eta > 0.0 && op.meta.l > op.meta.mu);
    }

    #[test]
    fn alpha_gradient_examples() {
        assert_eq!(alpha_gradient(0.0, 1.0, 5, 10.0, 0.1).unwrap(), 0.0);
        assert!((alpha_gradient(1e-2, 1.0, 5, 10.0, 0.1).unwrap() - 5e-2).abs() < 1e-15);
        let a = alpha_gradient(1e-2, 2.0, 3, 4.0, 0.5).unwrap();
        assert!((alpha_gradient(1e-2, 2.0, 3, 8.0, 0.5).unwrap() - 2.0 * a).abs() < 1e-15);
        assert!(alpha_gradient(1.0, 0.0, 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn gradient_norm_targeting() {
        let fam = GradientFamily::CubicPerturbedQuadratic { n: 20, mu: 1e-3, l: 1.0, eta: 1e-2, tau: 0.1, rotate: false };
        let op = make_gradient_step(&fam, 5).unwrap();
        let d = gaussian_vector(&mut rng(6), 20);
        let x0 = point_with_gradient_norm(&op, &d, 0.1).unwrap();
        assert!((op.gradient(&x0).unwrap().norm() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn translation_shifts_fixed_point() {
        let op = make_linear(&[0.3, 0.6], 1).unwrap();
        let s = DVector::from_vec(vec![5.0, -1.0]);
        let t = op.translated(s.clone());
        let xs = t.fixed_point.clone().unwrap();
        assert!((t.apply(&xs) - &xs).norm() < 1e-12);
        assert!((xs - op.fixed_point.clone().unwrap() - s).norm() < 1e-12);
    }
}
