use super::config::{parse_real, parse_sweep, Config};
use super::{fmt_f64, fmt_opt, CliError, Table};
use crate::caa::{guard_norm, guarded_caa_with, Budget, CaaConfig, CaaError, GuardOptions, RunTrace, StopReason};
use crate::chebsolve::{self, ChebError, MinimaxProblem, MinimaxSolution};
use crate::operators::{
    gaussian_vector, make_gradient_step, make_linear, make_perturbed_linear, point_with_gradient_norm, rng,
    spread_spectrum, GradientFamily, OperatorSpec,
};
use crate::rates::{self, RateParams};
use rayon::prelude::*;

/// Result of one subcommand: the bytes to write, plus failures that make the
/// exit status nonzero and informational notes for stderr.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

fn params(cfg: &Config) -> Result<RateParams, CliError> {
    let rho = cfg.get::<f64>("rho")?.ok_or_else(|| CliError::Usage("missing required key `rho`".into()))?;
    let k = cfg.get::<usize>("k")?.ok_or_else(|| CliError::Usage("missing required key `k`".into()))?;
    Ok(RateParams::new(rho, k)?)
}

fn list<T: std::str::FromStr>(cfg: &Config, key: &str) -> Result<Vec<T>, CliError> {
    let values = cfg.get_with(key, |v| {
        v.split(',').map(|t| t.trim().parse::<T>().map_err(|_| format!("cannot parse `{t}`"))).collect::<Result<Vec<T>, _>>()
    })?;
    values.ok_or_else(|| CliError::Usage(format!("missing required key `{key}`")))
}

const RATES_HEADER: [&str; 14] = [
    "rho", "k", "rho_star", "c_star", "c0", "c1", "rho1", "eps_tilde", "alpha0", "alpha1", "alpha2", "alpha3", "alpha4",
    "alpha5",
];

/// One row per `(rho, k)` in the cartesian product of the `rho` and `k` lists.
pub fn rates(cfg: &Config) -> Result<Outcome, CliError> {
    cfg.check_keys(&["rho", "k"], "rates")?;
    let rhos: Vec<f64> = list(cfg, "rho")?;
    let ks: Vec<usize> = list(cfg, "k")?;
    let mut table = Table::new(&RATES_HEADER);
    for &rho in &rhos {
        for &k in &ks {
            let p = RateParams::new(rho, k)?;
            let (c1, rho1) = rates::c1_rho1(&p);
            let a = rates::alpha_thresholds(&p);
            let g = rates::grad_thresholds(&p);
            let mut row = vec![fmt_f64(rho), k.to_string()];
            row.extend(
                [
                    rates::rho_star(&p),
                    rates::c_star(&p),
                    rates::c0(&p),
                    c1,
                    rho1,
                    rates::eps_tilde(&p),
                    a.around_c0,
                    a.up_to_c1,
                    a.up_to_c_star,
                    g.around_c0,
                    g.up_to_c1,
                    g.up_to_c_star,
                ]
                .map(fmt_f64),
            );
            table.push(row);
        }
    }
    Ok(Outcome { text: table.to_csv(), ..Default::default() })
}

const CHEB_HEADER: [&str; 9] =
    ["C", "rho_tilde_lp", "lemma2_bound", "prop5_bound", "lemma1_chord", "proj_bound", "rho_star", "rho_pow_k", "converged"];

type Solved = Result<(MinimaxSolution, bool), ChebError>;

fn settle(r: Result<MinimaxSolution, ChebError>) -> Solved {
    match r {
        Ok(s) => Ok((s, true)),
        Err(ChebError::NotConverged { best }) => Ok((best, false)),
        Err(e) => Err(e),
    }
}

/// Sweep over `C` of the constrained Chebyshev value and every bound on it.
/// `C` accepts the names `c0` and `cstar`; the default sweep is
/// `1:1.05*cstar:40:log`.
pub fn chebsolve(cfg: &Config) -> Result<Outcome, CliError> {
    cfg.check_keys(&["rho", "k", "C", "M", "tol"], "chebsolve")?;
    let p = params(cfg)?;
    if p.k() > chebsolve::MAX_DEGREE {
        return Err(CliError::Usage(format!("k must be <= {} for the LP solver", chebsolve::MAX_DEGREE)));
    }
    let m: usize = cfg.get_or("M", p.k())?;
    cfg.check("M", m, m >= 1, "at least 1")?;
    let tol: f64 = cfg.get_or("tol", chebsolve::DEFAULT_TOL)?;
    cfg.check("tol", tol, tol > 0.0, "positive")?;
    let names = [("c0", rates::c0(&p)), ("cstar", rates::c_star(&p))];
    let sweep = cfg.get_with("C", |v| parse_sweep(v, &names))?.unwrap_or(parse_sweep("1:1.05*cstar:40:log", &names).expect("valid"));
    if let Some(bad) = sweep.iter().find(|c| !(**c >= 1.0)) {
        return Err(cfg.error_at("C", format!("every C must be >= 1, got {bad}")));
    }
    let knots = rates::global_bound(&p, m).ok();
    let (rho, k) = (p.rho(), p.k());
    let solved: Vec<(Solved, Solved)> = sweep
        .par_iter()
        .map(|&c| {
            let direct = settle(chebsolve::solve_ctr_cheb(&MinimaxProblem::direct(rho, k, c), tol));
            let proj = settle(chebsolve::solve_projection_bound(&MinimaxProblem::projection(rho, k, c), tol));
            (direct, proj)
        })
        .collect();

    let mut table = Table::new(&CHEB_HEADER);
    let mut failures = Vec::new();
    for (&c, (direct, proj)) in sweep.iter().zip(solved) {
        let mut converged = true;
        let mut value = |r: Solved, what: &str| match r {
            Ok((s, ok)) => {
                if !ok {
                    converged = false;
                    failures.push(format!("{what} did not converge at C = {c}"));
                }
                Some(s.value)
            }
            Err(e) => {
                converged = false;
                failures.push(format!("{what} failed at C = {c}: {e}"));
                None
            }
        };
        let lp = value(direct, "LP solve");
        let pb = value(proj, "projection solve");
        table.push(vec![
            fmt_f64(c),
            fmt_opt(lp),
            fmt_opt(rates::tilde_rho_small_c(&p, c).ok()),
            fmt_opt(knots.as_ref().and_then(|kn| rates::evaluate_bound(kn, c).ok())),
            fmt_opt(rates::lemma1_chord(&p, c).ok()),
            fmt_opt(pb),
            fmt_f64(rates::rho_star(&p)),
            fmt_f64(p.rho_pow_k()),
            converged.to_string(),
        ]);
    }
    let notes = if knots.is_none() { vec![format!("prop5_bound is empty: it needs k > 2, got k = {k}")] } else { vec![] };
    Ok(Outcome { text: table.to_csv(), failures, notes })
}

const RUN_KEYS: [&str; 21] = [
    "family", "n", "m", "rho", "mu", "L", "eta", "tau", "alpha", "lambda", "rotate", "k", "C", "N", "M", "tol", "grad_norm0",
    "grad_tol", "seed", "floor_check", "start_seed",
];

fn family_keys(family: &str) -> Option<&'static [&'static str]> {
    Some(match family {
        "linear" => &["n", "rho"],
        "perturbed_linear" => &["n", "rho", "alpha"],
        "quadratic" => &["n", "rho", "mu", "L", "rotate"],
        "cubic" => &["n", "rho", "mu", "L", "eta", "tau", "rotate"],
        "logistic" => &["n", "m", "lambda"],
        _ => return None,
    })
}

/// How the per-iteration bound column is computed.
enum BoundKind {
    Perturbation(f64),
    Hessian { eta: f64, l: f64 },
}

fn build_operator(cfg: &Config, seed: u64) -> Result<(OperatorSpec, BoundKind), CliError> {
    let family: String = cfg.get("family")?.ok_or_else(|| CliError::Usage("missing required key `family`".into()))?;
    let Some(own) = family_keys(&family) else {
        return Err(cfg.error_at("family", format!("unknown family `{family}` (linear, perturbed_linear, quadratic, cubic, logistic)")));
    };
    let shared = ["family", "k", "C", "N", "M", "tol", "grad_norm0", "grad_tol", "seed", "floor_check", "start_seed"];
    if let Some(key) = RUN_KEYS.iter().find(|k| cfg.contains(k) && !own.contains(k) && !shared.contains(k)) {
        return Err(cfg.error_at(key, format!("key `{key}` does not apply to family `{family}`")));
    }
    let n: usize = cfg.get_or("n", 50)?;
    cfg.check("n", n, n >= 1, "at least 1")?;
    let rotate: bool = cfg.get_or("rotate", true)?;
    let gradient_mu = |cfg: &Config| -> Result<(f64, f64), CliError> {
        let l: f64 = cfg.get_or("L", 1.0)?;
        cfg.check("L", l, l > 0.0 && l.is_finite(), "positive")?;
        let mu = match (cfg.get::<f64>("mu")?, cfg.get::<f64>("rho")?) {
            (Some(_), Some(_)) => return Err(CliError::Usage("set either `mu` or `rho`, not both".into())),
            (Some(mu), None) => mu,
            (None, rho) => (1.0 - rho.unwrap_or(0.9)) * l,
        };
        Ok((mu, l))
    };
    let op_err = |e: crate::Error| CliError::Usage(format!("invalid operator: {e}"));
    Ok(match family.as_str() {
        "linear" | "perturbed_linear" => {
            let rho: f64 = cfg.get_or("rho", 0.9)?;
            let alpha: f64 = cfg.get_or("alpha", 0.0)?;
            cfg.check("alpha", alpha, alpha >= 0.0 && alpha < rho, "in [0, rho)")?;
            cfg.check("rho", rho, rho > 0.0 && rho < 1.0, "in (0, 1)")?;
            // spectral top rho - alpha, so the full map contracts at rate rho
            let spectrum = spread_spectrum(&mut rng(seed ^ 0x5eed), n, 0.0, rho - alpha);
            let op = if family == "linear" { make_linear(&spectrum, seed) } else { make_perturbed_linear(&spectrum, alpha, seed) };
            (op.map_err(op_err)?, BoundKind::Perturbation(alpha))
        }
        "quadratic" => {
            let (mu, l) = gradient_mu(cfg)?;
            let op = make_gradient_step(&GradientFamily::Quadratic { n, mu, l, rotate }, seed).map_err(op_err)?;
            (op, BoundKind::Hessian { eta: 0.0, l })
        }
        "cubic" => {
            let (mu, l) = gradient_mu(cfg)?;
            let eta: f64 = cfg.get_or("eta", 1e-2)?;
            let tau: f64 = cfg.get_or("tau", 1.0)?;
            let fam = GradientFamily::CubicPerturbedQuadratic { n, mu, l, eta, tau, rotate };
            (make_gradient_step(&fam, seed).map_err(op_err)?, BoundKind::Hessian { eta, l })
        }
        _ => {
            let m: usize = cfg.get_or("m", 4 * n)?;
            let lambda: f64 = cfg.get_or("lambda", 0.05)?;
            let op = make_gradient_step(&GradientFamily::LogisticRidge { n, m, lambda }, seed).map_err(op_err)?;
            let (eta, l) = (op.meta.eta, op.meta.l);
            (op, BoundKind::Hessian { eta, l })
        }
    })
}

const RUN_HEADER: [&str; 8] =
    ["outer_iter", "grad_norm", "ratio", "guard_taken", "coeff_l1", "bound_hat_rho", "rho_kN", "subproblem_converged"];

/// Guarded CAA on a generated operator. `seed` (from `--seed`) overrides the
/// `seed` key. The start point is a Gaussian direction from `start_seed`
/// (default `seed + 1`) around the fixed point, scaled to `grad_norm0`.
pub fn run(cfg: &Config, seed: Option<u64>) -> Result<Outcome, CliError> {
    cfg.check_keys(&RUN_KEYS, "run")?;
    let seed = match seed {
        Some(s) => s,
        None => cfg.get_or("seed", 0u64)?,
    };
    let (op, bound_kind) = build_operator(cfg, seed)?;
    let k: usize = cfg.get_or("k", 5)?;
    cfg.check("k", k, k >= 1, "at least 1")?;
    let budget = cfg.get_with("C", |v| match v {
        "inf" | "unconstrained" => Ok(Budget::Unconstrained),
        _ => parse_real(v, &[]).and_then(|c| if c >= 1.0 && c.is_finite() { Ok(Budget::Bounded(c)) } else { Err("C must be finite and >= 1".into()) }),
    })?;
    let budget = budget.unwrap_or(Budget::Bounded(100.0));
    let n_outer: usize = cfg.get_or("N", 100)?;
    cfg.check("N", n_outer, n_outer >= 1, "at least 1")?;
    let m: usize = cfg.get_or("M", k)?;
    cfg.check("M", m, m >= 1, "at least 1")?;
    let tol: f64 = cfg.get_or("tol", crate::lsq::DEFAULT_REL_TOL)?;
    cfg.check("tol", tol, tol > 0.0, "positive")?;
    let grad_tol: f64 = cfg.get_or("grad_tol", 0.0)?;
    let floor_check: bool = cfg.get_or("floor_check", true)?;
    let start_seed: u64 = cfg.get_or("start_seed", seed.wrapping_add(1))?;

    let dir = gaussian_vector(&mut rng(start_seed), op.dim());
    let x0 = match cfg.get::<f64>("grad_norm0")? {
        Some(g0) => {
            cfg.check("grad_norm0", g0, g0 > 0.0 && g0.is_finite(), "positive")?;
            point_with_gradient_norm(&op, &dir, g0)?
        }
        None => op.fixed_point.clone().map(|xs| xs + &dir).unwrap_or(dir),
    };

    let caa_cfg = CaaConfig { k, budget, rel_tol: tol };
    let c = caa_cfg.c();
    let opts = GuardOptions { grad_tol, floor_check };
    let (trace, mut failures) = match guarded_caa_with(&op, &x0, &caa_cfg, n_outer, opts) {
        Ok(t) => (t, Vec::new()),
        Err(CaaError::Divergence { iterates, partial_run }) => {
            let msg = format!("iterates diverged after {} operator applications", iterates.len().saturating_sub(1));
            let trace = partial_run.map(|b| *b).unwrap_or_else(|| RunTrace {
                initial_grad_norm: guard_norm(&op, &x0),
                records: Vec::new(),
                x_final: x0.clone(),
                stop: StopReason::Completed,
            });
            (trace, vec![msg])
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };

    let p = RateParams::new(op.meta.rho, k).ok();
    let bound = |g_start: f64| -> Option<f64> {
        let p = p.as_ref()?;
        match bound_kind {
            BoundKind::Perturbation(alpha) => rates::hat_rho(p, c, alpha, m).ok(),
            BoundKind::Hessian { eta, l } => rates::hat_rho_grad(p, c, eta, l, g_start, m).ok(),
        }
    };
    let rk = op.meta.rho.powi(k as i32);
    let g0 = trace.initial_grad_norm;
    let mut table = Table::new(&RUN_HEADER);
    table.push(vec!["0".into(), fmt_f64(g0), String::new(), String::new(), String::new(), String::new(), fmt_f64(g0), String::new()]);
    let mut prev = g0;
    let mut unconverged = 0;
    for rec in &trace.records {
        let reference = g0 * rk.powf(rec.outer as f64);
        if rec.grad_norm > reference * (1.0 + 1e-12) {
            failures.push(format!("outer iteration {}: grad_norm {} exceeds rho_kN {}", rec.outer, rec.grad_norm, reference));
        }
        unconverged += usize::from(!rec.subproblem_converged);
        table.push(vec![
            rec.outer.to_string(),
            fmt_f64(rec.grad_norm),
            fmt_f64(rec.rate_estimate),
            rec.guard.as_str().into(),
            fmt_f64(rec.coeff_l1),
            fmt_opt(bound(prev)),
            fmt_f64(reference),
            rec.subproblem_converged.to_string(),
        ]);
        prev = rec.grad_norm;
    }
    let mut notes = Vec::new();
    match trace.stop {
        StopReason::Completed => {}
        StopReason::Converged => notes.push(format!("stopped after {} outer iterations: gradient reached tolerance", trace.records.len())),
        StopReason::RoundingFloor => {
            notes.push(format!("stopped after {} outer iterations at the rounding floor", trace.records.len()))
        }
    }
    if unconverged > 0 {
        notes.push(format!("{unconverged} weight subproblems hit their iteration cap; best feasible weights were used"));
    }
    Ok(Outcome { text: table.to_csv(), failures, notes })
}

/// `key = value` report of the six thresholds, `n_threshold`, and whether the
/// configured `alpha` and `eta / L^2 * grad_norm0` clear each threshold.
pub fn thresholds(cfg: &Config) -> Result<Outcome, CliError> {
    cfg.check_keys(&["rho", "k", "alpha", "eta", "L", "grad_norm0"], "thresholds")?;
    let p = params(cfg)?;
    let alpha: f64 = cfg.get_or("alpha", 0.0)?;
    cfg.check("alpha", alpha, alpha >= 0.0, "non-negative")?;
    let eta: f64 = cfg.get_or("eta", 0.0)?;
    cfg.check("eta", eta, eta >= 0.0, "non-negative")?;
    let l: f64 = cfg.get_or("L", 1.0)?;
    cfg.check("L", l, l > 0.0, "positive")?;
    let g0: f64 = cfg.get_or("grad_norm0", 1.0)?;
    cfg.check("grad_norm0", g0, g0 >= 0.0, "non-negative")?;

    let a = rates::alpha_thresholds(&p);
    let g = rates::grad_thresholds(&p);
    let n = rates::n_threshold(&p, eta, l, g0)?;
    let grad_level = eta / (l * l) * g0;
    let cleared = |level: f64, thr: f64| if level == 0.0 || level < thr { "cleared" } else { "not cleared" };

    let mut lines = vec![format!("rho = {}", fmt_f64(p.rho())), format!("k = {}", p.k())];
    for (i, v) in [a.around_c0, a.up_to_c1, a.up_to_c_star, g.around_c0, g.up_to_c1, g.up_to_c_star].iter().enumerate() {
        lines.push(format!("alpha{i} = {}", fmt_f64(*v)));
    }
    lines.push(format!("n_threshold = {}", fmt_f64(n)));
    lines.push(format!("alpha = {}", fmt_f64(alpha)));
    for (tag, thr) in [("i", a.around_c0), ("ii", a.up_to_c1), ("iii", a.up_to_c_star)] {
        lines.push(format!("alpha_{tag} = {}", cleared(alpha, thr)));
    }
    lines.push(format!("grad_perturbation = {}", fmt_f64(grad_level)));
    for (tag, thr) in [("i", g.around_c0), ("ii", g.up_to_c1), ("iii", g.up_to_c_star)] {
        lines.push(format!("grad_{tag} = {}", cleared(grad_level, thr)));
    }
    let mut text = lines.join("\n");
    text.push('\n');
    Ok(Outcome { text, ..Default::default() })
}
