use caa::caa::{caa_step, guarded_caa, CaaConfig};
use caa::chebsolve::{solve_ctr_cheb, MinimaxProblem, DEFAULT_TOL};
use caa::lp::{solve_lp, Constraint, LinearProgram, Relation};
use caa::lsq::{solve_weights, ResidualMatrix};
use caa::operators::{
    gaussian_vector, make_gradient_step, make_linear, make_perturbed_linear, rng, spread_spectrum, GradientFamily,
};
use caa::polynomials::{max_abs, rescaled_cheb, Polynomial};
use caa::rates::{self, RateParams};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn rate_params() -> impl Strategy<Value = RateParams> {
    (0.05f64..0.9995, 1usize..=10).prop_map(|(rho, k)| RateParams::new(rho, k).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn horner_matches_power_sum(coeffs in prop::collection::vec(-5.0f64..5.0, 1..10), x in -2.0f64..2.0) {
        let p = Polynomial::new(coeffs.clone());
        let naive: f64 = coeffs.iter().enumerate().map(|(i, c)| c * x.powi(i as i32)).sum();
        prop_assert!((p.eval(x) - naive).abs() <= 1e-12 * (1.0 + naive.abs()) * 32.0);
    }

    #[test]
    fn rescaled_cheb_is_normalised_and_levelled(p in rate_params(), frac in 0.0f64..1.0) {
        let eps = frac * rates::eps_tilde(&p);
        let poly = rescaled_cheb(p.rho(), eps, p.k()).unwrap();
        prop_assert!((poly.eval(1.0) - 1.0).abs() < 1e-9);
        let level = rates::rho_eps(p.rho(), eps, p.k()).unwrap();
        let (sup, _) = max_abs(&poly, -eps, p.rho()).unwrap();
        // Horner error bound: a small multiple of eps_mach * ||p||_1 on [-1, 1]
        let tol = 1e-9 * level + 64.0 * f64::EPSILON * poly.l1_norm();
        prop_assert!((sup - level).abs() <= tol, "sup {} vs level {}", sup, level);
    }

    #[test]
    fn rate_identities(p in rate_params()) {
        prop_assert_eq!(rates::rho_eps(p.rho(), 0.0, p.k()).unwrap(), rates::rho_star(&p));
        let l1 = rates::p_eps_l1(p.rho(), 0.0, p.k()).unwrap();
        prop_assert!((l1 - rates::c_star(&p)).abs() <= 1e-10 * l1);
        if p.k() >= 2 {
            prop_assert!(rates::rho_star(&p) < p.rho_pow_k());
        }
    }

    #[test]
    fn thresholds_are_ordered(p in rate_params()) {
        let a = rates::alpha_thresholds(&p);
        let g = rates::grad_thresholds(&p);
        prop_assert!(a.up_to_c_star <= a.around_c0 && a.up_to_c1 <= a.around_c0);
        prop_assert!(g.up_to_c_star <= g.around_c0 && g.up_to_c1 <= g.around_c0);
        prop_assert!([a.around_c0, a.up_to_c1, a.up_to_c_star, g.around_c0, g.up_to_c1, g.up_to_c_star].iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn n_threshold_shifts_by_log_two(p in rate_params(), eta in 1e-6f64..1.0, g0 in 1e-6f64..10.0) {
        let a = rates::n_threshold(&p, eta, 1.0, g0).unwrap();
        let b = rates::n_threshold(&p, eta, 1.0, 2.0 * g0).unwrap();
        let want = 2f64.ln() / (p.k() as f64 * (1.0 / p.rho()).ln());
        prop_assert!((b - a - want).abs() <= 1e-9 * want.max(1.0));
    }

    #[test]
    fn knot_bound_shape(rho in 0.5f64..0.999, k in 3usize..=8, m in 1usize..=8, t in 0.0f64..1.0, dt in 0.0f64..0.2) {
        let p = RateParams::new(rho, k).unwrap();
        let kn = rates::global_bound(&p, m).unwrap();
        let cs = rates::c_star(&p);
        let c = cs.powf(t);
        let c2 = cs.powf((t + dt).min(1.0));
        let (v, v2) = (rates::evaluate_bound(&kn, c).unwrap(), rates::evaluate_bound(&kn, c2).unwrap());
        prop_assert!(v2 <= v + 1e-15);
        prop_assert!(v <= p.rho_pow_k() + 1e-15 && v >= rates::rho_star(&p) - 1e-15);
        prop_assert!((rates::evaluate_bound(&kn, 1.0).unwrap() - p.rho_pow_k()).abs() < 1e-14);
        prop_assert_eq!(rates::evaluate_bound(&kn, cs * (1.0 + dt)).unwrap(), rates::rho_star(&p));
    }

    #[test]
    fn lp_solution_is_certified_by_its_duals(
        a in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 1..6),
        b in prop::collection::vec(0.1f64..2.0, 6),
        c in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let mut constraints: Vec<Constraint> = a.iter().zip(&b).map(|(row, rhs)| Constraint::new(row.clone(), Relation::Le, *rhs)).collect();
        constraints.push(Constraint::new(vec![1.0; 4], Relation::Le, 10.0));
        let lp = LinearProgram { objective: c.clone(), constraints: constraints.clone() };
        let sol = solve_lp(&lp).unwrap();
        for (row, y) in constraints.iter().zip(&sol.duals) {
            let lhs: f64 = row.coeffs.iter().zip(&sol.x).map(|(p, q)| p * q).sum();
            prop_assert!(lhs <= row.rhs + 1e-9);
            prop_assert!(*y <= 1e-12);
        }
        prop_assert!(sol.x.iter().all(|v| *v >= -1e-12));
        let dual_obj: f64 = constraints.iter().zip(&sol.duals).map(|(r, y)| r.rhs * y).sum();
        prop_assert!((dual_obj - sol.objective).abs() <= 1e-9);
        for (j, cj) in c.iter().enumerate() {
            let aty: f64 = constraints.iter().zip(&sol.duals).map(|(r, y)| r.coeffs[j] * y).sum();
            prop_assert!(aty <= cj + 1e-9, "dual infeasible in column {}", j);
        }
    }

    #[test]
    fn weights_are_feasible_and_beat_samples(
        seed in any::<u64>(), rows in 2usize..12, k in 1usize..6, c in 1.0f64..20.0, scale in -200i32..200,
    ) {
        let mut g = rng(seed);
        let m = DMatrix::from_fn(rows, k + 1, |_, _| g.random_range(-1.0..1.0));
        let w = solve_weights(&ResidualMatrix::new(m.clone()), c, 1e-10).unwrap();
        prop_assert!((w.c.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(w.l1 <= c * (1.0 + 1e-9));
        // any feasible point: a random sum-one vector pulled into the ball
        for _ in 0..20 {
            let mut v = DVector::from_fn(k + 1, |_, _| g.random_range(-1.0..1.0));
            v[0] += 1.0 - v.sum();
            let l1 = v.abs().sum();
            if l1 <= c {
                prop_assert!(w.residual_norm <= (&m * &v).norm() * (1.0 + 1e-6) + 1e-12);
            }
        }
        let s = 2f64.powi(scale);
        let ws = solve_weights(&ResidualMatrix::new(&m * s), c, 1e-10).unwrap();
        prop_assert!((ws.residual_norm / s - w.residual_norm).abs() <= 1e-6 * w.residual_norm.max(1e-300));
    }

    #[test]
    fn lp_value_is_monotone_in_budget(rho in 0.5f64..0.99, k in 1usize..=6, t in 0.0f64..1.0, dt in 0.0f64..0.5) {
        let p = RateParams::new(rho, k).unwrap();
        let cs = rates::c_star(&p);
        let (c1, c2) = (cs.powf(t), cs.powf((t + dt).min(1.0)));
        // LP values are lower bounds within `tol` of the optimum, which is non-increasing in C
        let tol = DEFAULT_TOL;
        let v1 = solve_ctr_cheb(&MinimaxProblem::direct(rho, k, c1), tol).unwrap().value;
        let v2 = solve_ctr_cheb(&MinimaxProblem::direct(rho, k, c2), tol).unwrap().value;
        prop_assert!(v2 <= v1 + tol);
        prop_assert!(v1 <= p.rho_pow_k() + 1e-12 && v1 >= rates::rho_star(&p) - tol);
    }

    #[test]
    fn step_is_translation_invariant(seed in any::<u64>(), n in 2usize..10, k in 1usize..6, c in 1.0f64..50.0) {
        let op = make_linear(&spread_spectrum(&mut rng(seed), n, 0.0, 0.8), seed).unwrap();
        let shift = gaussian_vector(&mut rng(seed ^ 1), n);
        let moved = op.translated(shift.clone());
        let x0 = gaussian_vector(&mut rng(seed ^ 2), n) * 3.0;
        let cfg = CaaConfig::new(k, c);
        let a = caa_step(&op, &x0, &cfg).unwrap();
        let b = caa_step(&moved, &(&x0 + &shift), &cfg).unwrap();
        prop_assert!((a.ratio - b.ratio).abs() <= 1e-6 * a.ratio + 1e-10, "{} vs {}", a.ratio, b.ratio);
    }

    #[test]
    fn operators_contract_at_their_rate(seed in any::<u64>(), n in 1usize..12, alpha in 0.0f64..0.05, family in 0u8..4) {
        let op = match family {
            0 => make_linear(&spread_spectrum(&mut rng(seed), n, 0.0, 0.9), seed).unwrap(),
            1 => make_perturbed_linear(&spread_spectrum(&mut rng(seed), n, 0.0, 0.9), alpha, seed).unwrap(),
            2 => make_gradient_step(&GradientFamily::Quadratic { n, mu: 0.1, l: 2.0, rotate: true }, seed).unwrap(),
            _ => make_gradient_step(&GradientFamily::CubicPerturbedQuadratic { n, mu: 0.1, l: 2.0, eta: 1.0, tau: 0.5, rotate: true }, seed).unwrap(),
        };
        let x = gaussian_vector(&mut rng(seed ^ 3), n);
        let y = gaussian_vector(&mut rng(seed ^ 4), n);
        let lhs = (op.apply(&x) - op.apply(&y)).norm();
        prop_assert!(lhs <= op.meta.rho * (&x - &y).norm() * (1.0 + 1e-12) + 1e-14);
        if let Some(g) = op.gradient(&x) {
            let step = &x - g / op.meta.l;
            prop_assert!((op.apply(&x) - step).norm() <= 1e-12 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn guarded_run_never_increases(seed in any::<u64>(), n in 2usize..10, k in 1usize..6, c in 1.0f64..100.0) {
        let op = make_gradient_step(&GradientFamily::Quadratic { n, mu: 0.05, l: 1.0, rotate: true }, seed).unwrap();
        let x0 = gaussian_vector(&mut rng(seed ^ 5), n);
        let t = guarded_caa(&op, &x0, &CaaConfig::new(k, c), 20).unwrap();
        let mut prev = t.initial_grad_norm;
        for r in &t.records {
            prop_assert!(r.grad_norm <= prev);
            prev = r.grad_norm;
        }
    }
}
