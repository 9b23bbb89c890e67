//! Polynomials in the monomial basis, Chebyshev polynomials of the first kind
//! and their rescalings to intervals `[-eps, rho]`.

use crate::error::{argument, Error, Result};

/// Largest Chebyshev order whose monomial coefficients stay finite in `f64`.
pub const MAX_CHEBYSHEV_ORDER: usize = 64;

/// Default grid density factor for [`max_abs_on_interval`]: `64 * (degree + 1)` points.
pub const DEFAULT_GRID_FACTOR: usize = 64;

/// Default bracket width for the golden-section refinement.
pub const DEFAULT_REFINE_TOL: f64 = 1e-12;

/// Real polynomial stored by its monomial coefficients `c_0, ..., c_d`.
///
/// Trailing zero coefficients are trimmed on construction, so the leading
/// coefficient is nonzero unless the polynomial is constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    /// The monomial `x^k`.
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Sum of the absolute values of the coefficients.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn sub(&self, other: &Polynomial) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|i| {
                self.coeffs.get(i).copied().unwrap_or(0.0) - other.coeffs.get(i).copied().unwrap_or(0.0)
            })
            .collect();
        Self::new(coeffs)
    }
}

/// `p_{j+1}(x) = 2 (a x + b) p_j(x) - p_{j-1}(x)`, i.e. `T_k(a x + b)` in the monomial basis.
fn chebyshev_of_affine(k: usize, a: f64, b: f64) -> Vec<f64> {
    let mut prev = vec![1.0];
    if k == 0 {
        return prev;
    }
    let mut cur = vec![b, a];
    for _ in 1..k {
        let mut next = vec![0.0; cur.len() + 1];
        for (i, &c) in cur.iter().enumerate() {
            next[i] += 2.0 * b * c;
            next[i + 1] += 2.0 * a * c;
        }
        for (i, &c) in prev.iter().enumerate() {
            next[i] -= c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

fn check_order(k: usize) -> Result<()> {
    if k > MAX_CHEBYSHEV_ORDER {
        return Err(Error::Range(format!(
            "Chebyshev order {k} exceeds {MAX_CHEBYSHEV_ORDER}"
        )));
    }
    Ok(())
}

/// Chebyshev polynomial of the first kind `T_k` in the monomial basis.
pub fn chebyshev_first_kind(k: usize) -> Result<Polynomial> {
    check_order(k)?;
    Ok(Polynomial::new(chebyshev_of_affine(k, 1.0, 0.0)))
}

/// Minimax polynomial on `[-eps, rho]` normalised by `p(1) = 1`:
/// `T_k(2 (x + eps) / (rho + eps) - 1) / |T_k(2 (1 + eps) / (rho + eps) - 1)|`.
pub fn rescaled_cheb(rho: f64, eps: f64, k: usize) -> Result<Polynomial> {
    check_order(k)?;
    if !(rho.is_finite() && eps.is_finite()) || eps < 0.0 || rho + eps <= 0.0 {
        return Err(argument(format!(
            "rescaled Chebyshev needs eps >= 0 and rho + eps > 0 (rho={rho}, eps={eps})"
        )));
    }
    if k == 0 {
        return Ok(Polynomial::new(vec![1.0]));
    }
    let width = rho + eps;
    let a = 2.0 / width;
    let b = (eps - rho) / width;
    let raw = Polynomial::new(chebyshev_of_affine(k, a, b));
    // T_k(y) >= 1 for y >= 1, so the normaliser is positive.
    let at_one = raw.eval(1.0);
    Ok(raw.scale(1.0 / at_one))
}

pub fn l1_norm(p: &Polynomial) -> f64 {
    p.l1_norm()
}

/// Maximum of `|p|` over `[a, b]` and a point where it is attained.
///
/// A uniform grid of `grid_size` points locates candidate maxima; each grid
/// local maximum is then refined by golden-section search on its two
/// neighbouring cells until the bracket is narrower than `refine_tol`.
pub fn max_abs_on_interval(
    p: &Polynomial,
    a: f64,
    b: f64,
    grid_size: usize,
    refine_tol: f64,
) -> Result<(f64, f64)> {
    if !(a < b) {
        return Err(argument(format!("degenerate interval [{a}, {b}]")));
    }
    let min_grid = 2 * (p.degree() + 1);
    if grid_size < min_grid.max(2) {
        return Err(argument(format!(
            "grid_size {grid_size} below 2*(degree+1) = {min_grid}"
        )));
    }
    let abs = |x: f64| p.eval(x).abs();
    let h = (b - a) / (grid_size - 1) as f64;
    let xs: Vec<f64> = (0..grid_size)
        .map(|i| if i + 1 == grid_size { b } else { a + h * i as f64 })
        .collect();
    let vals: Vec<f64> = xs.iter().map(|&x| abs(x)).collect();

    let mut candidates: Vec<usize> = (0..grid_size)
        .filter(|&i| {
            let left = i == 0 || vals[i] >= vals[i - 1];
            let right = i + 1 == grid_size || vals[i] >= vals[i + 1];
            left && right
        })
        .collect();
    candidates.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    candidates.truncate(2 * (p.degree() + 1));

    let mut best = (vals[candidates[0]], xs[candidates[0]]);
    for &i in &candidates {
        let lo = xs[i.saturating_sub(1)];
        let hi = xs[(i + 1).min(grid_size - 1)];
        let (x, v) = golden_section_max(&abs, lo, hi, refine_tol);
        let (x, v) = if vals[i] > v { (xs[i], vals[i]) } else { (x, v) };
        if v > best.0 {
            best = (v, x);
        }
    }
    Ok(best)
}

fn golden_section_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    // The bracket shrinks by INV_PHI per step; 200 steps reach any f64 tolerance.
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let mut best = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    for x in [lo, hi] {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Convenience wrapper using the default grid density and refinement tolerance.
pub fn max_abs(p: &Polynomial, a: f64, b: f64) -> Result<(f64, f64)> {
    let grid = DEFAULT_GRID_FACTOR * (p.degree() + 1);
    max_abs_on_interval(p, a, b, grid, DEFAULT_REFINE_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn power_sum(coeffs: &[f64], x: f64) -> f64 {
        coeffs.iter().enumerate().map(|(i, c)| c * x.powi(i as i32)).sum()
    }

    #[test]
    fn chebyshev_base_cases() {
        assert_eq!(chebyshev_first_kind(0).unwrap().coeffs(), &[1.0]);
        assert_eq!(chebyshev_first_kind(1).unwrap().coeffs(), &[0.0, 1.0]);
        assert_eq!(chebyshev_first_kind(3).unwrap().coeffs(), &[0.0, -3.0, 0.0, 4.0]);
    }

    #[test]
    fn chebyshev_cosine_identity() {
        let t5 = chebyshev_first_kind(5).unwrap();
        for theta in [0.0, PI / 7.0, PI / 3.0] {
            assert!((t5.eval(theta.cos()) - (5.0 * theta).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn chebyshev_bounded_on_unit_interval() {
        for k in 0..=12 {
            let t = chebyshev_first_kind(k).unwrap();
            for i in 0..1000 {
                let x = -1.0 + 2.0 * i as f64 / 999.0;
                assert!(t.eval(x).abs() <= 1.0 + 1e-12, "k={k} x={x}");
            }
            assert!((t.eval(1.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chebyshev_order_cap() {
        assert!(chebyshev_first_kind(64).is_ok());
        assert!(matches!(chebyshev_first_kind(65), Err(Error::Range(_))));
    }

    #[test]
    fn horner_matches_power_sum() {
        for k in 0..=12 {
            let p = rescaled_cheb(0.9, 0.01, k.max(1)).unwrap();
            for i in 0..=40 {
                let x = -2.0 + 4.0 * i as f64 / 40.0;
                let direct = power_sum(p.coeffs(), x);
                let scale = p.coeffs().iter().enumerate().map(|(i, c)| (c * x.powi(i as i32)).abs()).sum::<f64>();
                assert!((p.eval(x) - direct).abs() <= 1e-12 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn degree_one_rescaling_is_the_affine_minimax() {
        let p = rescaled_cheb(0.9, 0.0, 1).unwrap();
        let expected = [-0.9 / 1.1, 2.0 / 1.1];
        for (c, e) in p.coeffs().iter().zip(expected) {
            assert!((c - e).abs() < 1e-14);
        }
        assert!((p.eval(1.0) - 1.0).abs() < 1e-12);
        let (v, _) = max_abs(&p, 0.0, 0.9).unwrap();
        assert!((v - 0.9 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn trailing_zeros_are_trimmed() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), 1);
        assert_eq!(Polynomial::new(vec![]).coeffs(), &[0.0]);
    }

    #[test]
    fn l1_norm_examples() {
        assert_eq!(l1_norm(&Polynomial::new(vec![0.0, -3.0, 0.0, 4.0])), 7.0);
        assert_eq!(l1_norm(&Polynomial::new(vec![1.0])), 1.0);
    }

    #[test]
    fn max_abs_examples() {
        let sq = Polynomial::monomial(2);
        let (v, x) = max_abs(&sq, 0.0, 0.9).unwrap();
        assert!((v - 0.81).abs() < 1e-14 && (x - 0.9).abs() < 1e-12);

        let t3 = chebyshev_first_kind(3).unwrap();
        let (v, x) = max_abs(&t3, -1.0, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!([-1.0, -0.5, 0.5, 1.0].iter().any(|m| (x - m).abs() < 1e-6));
    }

    #[test]
    fn max_abs_finds_interior_peak_between_grid_points() {
        // peak of 1 - (x - 0.3137)^2 sits off any uniform grid node
        let c = 0.3137_f64;
        let p = Polynomial::new(vec![1.0 - c * c, 2.0 * c, -1.0]);
        let (v, x) = max_abs_on_interval(&p, 0.0, 1.0, 6, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
        assert!((x - c).abs() < 1e-6);
    }

    #[test]
    fn max_abs_rejects_bad_arguments() {
        let p = Polynomial::monomial(3);
        assert!(max_abs_on_interval(&p, 1.0, 1.0, 100, 1e-12).is_err());
        assert!(max_abs_on_interval(&p, 0.0, 1.0, 7, 1e-12).is_err());
    }

    #[test]
    fn rescaled_cheb_rejects_bad_interval() {
        assert!(rescaled_cheb(0.9, -0.1, 3).is_err());
        assert!(rescaled_cheb(0.0, 0.0, 3).is_err());
    }
}
