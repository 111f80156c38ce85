use super::*;
use crate::model::{feasibility_check, parse_instance};
use crate::optimality::{convex_global_check, verify_kkt, Outcome, DEFAULT_KKT_TOL};

const EQ37: &str = "[problem]\nvars = x1 x2\nminimize = (x1+1)^2 + x2\nbox = -3 3 ; -3 3\n[index n]\nkind = countable\nstart = 2\n[constraints]\ng1 = x1 + 1\ng(n) = x1^3/(3*n) - x2\n";
const TOY: &str = "[problem]\nvars = x1 x2\nminimize = x1^2 + x2^2\nconvex = true\nbox = -2 2 ; -2 2\n[constraints]\ng = x1 + x2 + 1\n";
const ARC: &str = "[problem]\nvars = x1 x2\nminimize = (x1-2)^2 + (x2-2)^2\nconvex = true\nbox = -2 2 ; -2 2\n[index t]\nkind = interval\nlower = 0\nupper = 1.5707963267948966\n[constraints]\ng(t) = x1*cos(t) + x2*sin(t) - 1\n";

fn inst(src: &str) -> SipInstance {
    parse_instance(src).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

#[test]
fn countable_example_reaches_the_minimizer() {
    let i = inst(EQ37);
    let (x, trace) = solve(&i, &SolverConfig::default()).unwrap();
    assert_eq!(trace.status, SolverStatus::Converged);
    assert!(dist(&x, &[-1.0, 0.0]) <= 1e-6, "{x:?}");
    assert!(feasibility_check(&i, &x, FEASIBILITY_TOL).unwrap().feasible);
}

#[test]
fn convex_toy_with_certificate() {
    let i = inst(TOY);
    let (x, trace) = solve(&i, &SolverConfig::default()).unwrap();
    assert_eq!(trace.status, SolverStatus::Converged);
    assert!(dist(&x, &[-0.5, -0.5]) <= 1e-6, "{x:?}");
    let k = verify_kkt(&i, &x, DEFAULT_KKT_TOL).unwrap();
    assert_eq!(k.outcome, Outcome::CertificateFound);
    assert!((k.certificate.unwrap().lambda[0] - 1.0).abs() <= 1e-6);
    assert_eq!(convex_global_check(&i, &x, DEFAULT_KKT_TOL).unwrap().global, Some(true));
}

#[test]
fn unconstrained_quadratic_is_exact() {
    let i = inst("[problem]\nvars = x1 x2\nminimize = (x1-1)^2 + 2*(x2+2)^2 + x1*x2\n");
    let (x, trace) = solve(&i, &SolverConfig::default()).unwrap();
    assert_eq!(trace.status, SolverStatus::Converged);
    assert!(dist(&x, &[16.0 / 7.0, -18.0 / 7.0]) <= 1e-8, "{x:?}");
}

#[test]
fn max_cost_through_the_epigraph() {
    let i = inst("[problem]\nvars = x1 x2\nminimize_max = x1 + x2 ; -x1 ; -x2\nconvex = true\n");
    let (x, _) = solve(&i, &SolverConfig::default()).unwrap();
    assert!(dist(&x, &[0.0, 0.0]) <= 1e-6, "{x:?}");
}

#[test]
fn equality_constrained() {
    let i = inst("[problem]\nvars = x1 x2\nminimize = x1^2 + x2^2\n[equalities]\nh = x1 + 2*x2 - 5\n");
    let (x, trace) = solve(&i, &SolverConfig::default()).unwrap();
    assert_eq!(trace.status, SolverStatus::Converged);
    assert!(dist(&x, &[1.0, 2.0]) <= 1e-7, "{x:?}");
}

#[test]
fn exchange_on_an_arc() {
    let i = inst(ARC);
    let (x, trace) = solve(&i, &SolverConfig::default()).unwrap();
    assert_eq!(trace.status, SolverStatus::Converged, "{:?}", trace.iterations.last());
    let r = 0.5f64.sqrt();
    assert!(dist(&x, &[r, r]) <= 1e-6, "{x:?}");
    assert!(trace.iterations.len() > 1);
    let (_, limited) = solve(
        &i,
        &SolverConfig {
            max_outer: 1,
            initial_working_set: 1,
            ..SolverConfig::default()
        },
    )
    .unwrap();
    assert_eq!(limited.status, SolverStatus::IterationLimit);
}

/// Grid search over [-2, 2]^2 at step 0.01, then at step 1e-4 around the best
/// coarse point, with an independent constraint scan.
fn brute_force(cost: impl Fn(f64, f64) -> f64, feasible: impl Fn(f64, f64) -> bool) -> f64 {
    let scan = |c1: f64, c2: f64, half: i32, step: f64| {
        let mut best = (f64::INFINITY, c1, c2);
        for a in -half..=half {
            for b in -half..=half {
                let (x1, x2) = (c1 + a as f64 * step, c2 + b as f64 * step);
                if feasible(x1, x2) && cost(x1, x2) < best.0 {
                    best = (cost(x1, x2), x1, x2);
                }
            }
        }
        best
    };
    let (_, c1, c2) = scan(0.0, 0.0, 200, 0.01);
    scan(c1, c2, 200, 1e-4).0
}

#[test]
fn convex_instances_match_brute_force() {
    let i = inst("[problem]\nvars = x1 x2\nminimize = (x1-1)^2 + x2\nconvex = true\nbox = -2 2 ; -2 2\n[index t]\nkind = interval\nlower = 0\nupper = 1\ninclude_lower = false\n[constraints]\ng(t) = t*x1^2 - x2\n");
    let (x, trace) = solve(&i, &SolverConfig::default()).unwrap();
    assert_eq!(trace.status, SolverStatus::Converged);
    let oracle = brute_force(|a, b| (a - 1.0).powi(2) + b, |a, b| (1..=100).all(|k| k as f64 / 100.0 * a * a - b <= 0.0));
    assert!((trace.cost - oracle).abs() <= 1e-4, "{} vs {oracle} at {x:?}", trace.cost);

    let i = inst(ARC);
    let (_, trace) = solve(&i, &SolverConfig::default()).unwrap();
    let oracle = brute_force(
        |a, b| (a - 2.0).powi(2) + (b - 2.0).powi(2),
        |a, b| (0..=400).all(|k| {
            let t = std::f64::consts::FRAC_PI_2 * k as f64 / 400.0;
            a * t.cos() + b * t.sin() - 1.0 <= 0.0
        }),
    );
    assert!((trace.cost - oracle).abs() <= 1e-4, "{} vs {oracle}", trace.cost);
}

#[test]
fn seeded_runs_are_identical() {
    let i = inst(EQ37);
    let cfg = SolverConfig { seed: 11, ..Default::default() };
    assert_eq!(solve(&i, &cfg).unwrap(), solve(&i, &cfg).unwrap());
}

#[test]
fn accepted_iterations_do_not_increase_violation() {
    let (_, trace) = solve(&inst(ARC), &SolverConfig::default()).unwrap();
    let accepted: Vec<f64> = trace.iterations.iter().filter(|i| i.accepted).map(|i| i.max_violation).collect();
    assert!(accepted.windows(2).all(|w| w[1] <= w[0]));
    assert!(trace.max_violation <= trace.config.violation_tol);
}

#[test]
fn most_violated_examples() {
    let i = inst(EQ37);
    let m = most_violated_index(&i, &[0.0, 0.0]).unwrap();
    assert_eq!(m.label.as_deref(), Some("g1"));
    assert_eq!(m.violation, 1.0);
    assert!(most_violated_index(&i, &[-1.0, 0.5]).unwrap().violation <= 0.0);

    let i = inst("[problem]\nvars = x1 x2\n[index t]\nkind = interval\nlower = 0\nupper = 1\ninclude_lower = false\n[constraints]\ng0 = x1 + 1\ng(t) = t*x1 - x2^3\n");
    let m = most_violated_index(&i, &[0.0, -1.0]).unwrap();
    assert_eq!(m.violation, 1.0);
    assert_eq!(m.source, Some(Source::Family(0)));
    let mat = materialize(&i, &[0.0, -1.0], &MaterializeOptions::default()).unwrap();
    let lowest = mat
        .entries
        .iter()
        .filter(|e| e.source == Source::Family(0) && !e.is_limit())
        .filter_map(|e| e.t)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(m.t, Some(lowest));
}

#[test]
fn interval_maximizer_is_refined() {
    // g_t = -(t - c)^2 peaks between grid points
    let i = inst("[problem]\nvars = x\n[index t]\nkind = interval\nlower = 0\nupper = 1\nresolution = 3\nlevels = 0\n[constraints]\ng(t) = x - (t - 0.3)^2\n");
    let m = most_violated_index(&i, &[0.0]).unwrap();
    // grid {0, 0.5, 1}: best 0.5 gives -0.04; refinement reaches 0.3125 -> -0.00015625
    assert!(m.violation > -2e-4 && m.violation < 0.0, "{m:?}");
}

#[test]
fn solver_options_from_the_instance() {
    let i = inst("[problem]\nvars = x\nminimize = x^2\n[solver]\nstarts = 3\nseed = 9\ntol = 1e-8\n");
    let cfg = SolverConfig::default().with_options(&i.solver_options).unwrap();
    assert_eq!((cfg.multistart, cfg.seed, cfg.violation_tol), (3, 9, 1e-8));
    assert!(SolverConfig::default().with_options(&[("starts".into(), "0".into())]).is_err());
    assert!(SolverConfig::default().with_options(&[("nope".into(), "1".into())]).is_err());
}
