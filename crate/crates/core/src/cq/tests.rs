use super::*;
use crate::linsolve::dot;
use crate::model::{active_set, parse_instance};

fn ex37() -> SipInstance {
    parse_instance(
        "[problem]\nvars = x1 x2\nminimize = (x1+1)^2 + x2\n[index n]\nkind = countable\nstart = 2\n[constraints]\ng1 = x1 + 1\ng(n) = x1^3/(3*n) - x2\n",
    )
    .unwrap()
}

fn ex35() -> SipInstance {
    parse_instance(
        "[problem]\nvars = x1 x2\n[index t]\nkind = interval\nlower = 0\nupper = 1\ninclude_lower = false\n[constraints]\ng0 = x1 + 1\ng(t) = t*x1 - x2^3\n",
    )
    .unwrap()
}

fn ex411() -> SipInstance {
    parse_instance(
        "[problem]\nvars = x1 x2\nminimize = x1\nconvex = true\n[index t]\nkind = interval\nlower = 0\nupper = 1\ninclude_lower = false\ninclude_upper = false\n[constraints]\ng(t) = t*x1^2 - x2\n",
    )
    .unwrap()
}

fn inst(src: &str) -> SipInstance {
    parse_instance(src).unwrap()
}

#[test]
fn emfcq_on_paper_examples() {
    let r = check_emfcq(&ex37(), &[-1.0, 0.0], DEFAULT_MARGIN_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::Holds);
    assert!((r.direction[0] + 1.0).abs() < 1e-12, "{:?}", r.direction);
    assert_eq!(r.active, vec!["g1".to_string()]);
    let r = check_emfcq(&ex35(), &[-1.0, 0.0], DEFAULT_MARGIN_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::Holds);
}

#[test]
fn emfcq_fails_for_opposed_gradients() {
    let i = inst("[problem]\nvars = x1\n[constraints]\na = x1\nb = -x1\n");
    let r = check_emfcq(&i, &[0.0], DEFAULT_MARGIN_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::Fails);
    assert!(r.margin <= 1e-12);
}

#[test]
fn pmfcq_holds_for_countable_example() {
    let r = check_pmfcq(&ex37(), &[-1.0, 0.0], &default_eps_schedule(), DEFAULT_MARGIN_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::Holds, "{r:#?}");
    let w = r.witness.unwrap();
    let margin = r.margin.unwrap();
    assert!(margin >= 0.5);
    // re-verify against every ε-active gradient at that ε
    let eps = r.stabilized_eps.unwrap();
    let rep = active_set(&ex37(), &[-1.0, 0.0], eps, false).unwrap();
    for e in &rep.eps_active {
        assert!(dot(&e.grad, &w) <= -margin + 1e-9, "{}", e.label);
    }
}

#[test]
fn pmfcq_fails_for_interval_example() {
    let r = check_pmfcq(&ex35(), &[-1.0, 0.0], &default_eps_schedule(), DEFAULT_MARGIN_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::Fails, "{r:#?}");
    // the margin at each level is the smallest ε-active parameter value
    for e in &r.trace {
        for l in &e.levels {
            let tmin = 1.0 / 256.0 * 0.5f64.powi(l.depth as i32);
            assert!((l.margin - tmin).abs() <= 1e-9 * tmin.max(1e-300) + 1e-15, "eps {} depth {}: {} vs {tmin}", e.eps, l.depth, l.margin);
        }
    }
}

#[test]
fn pmfcq_single_halfspace() {
    let i = inst("[problem]\nvars = x1 x2\n[constraints]\ng = x1\n");
    let r = check_pmfcq(&i, &[0.0, 0.0], &default_eps_schedule(), DEFAULT_MARGIN_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::Holds);
    assert!((r.margin.unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn nfmcq_on_paper_examples() {
    assert_eq!(check_nfmcq(&ex35(), &[-1.0, 0.0]).unwrap().verdict, Verdict::Holds);
    assert_eq!(check_nfmcq(&ex37(), &[-1.0, 0.0]).unwrap().verdict, Verdict::Fails);
    assert_eq!(check_nfmcq(&ex411(), &[0.0, 0.0]).unwrap().verdict, Verdict::Holds);
}

#[test]
fn ssc_accepts_the_slater_point() {
    let r = check_ssc(&ex411(), Some(&[0.0, 1.0]), &[], None, &SscOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Holds);
    assert!((r.sup_value.unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn ssc_search_finds_a_point() {
    let r = check_ssc(&ex411(), None, &[vec![0.0, 0.0]], None, &SscOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Holds, "{r:?}");
    assert!(r.sup_value.unwrap() < 0.0);
}

#[test]
fn ssc_requires_convexity() {
    let r = check_ssc(&ex37(), None, &[vec![-1.0, 0.0]], None, &SscOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Unknown);
    assert_eq!(r.reason, "nonconvex");
}

#[test]
fn ssc_respects_affine_equalities() {
    let i = inst("[problem]\nvars = x1 x2\nconvex = true\n[constraints]\ng = x1 - x2 + 1\n[equalities]\nh = x1 + x2 - 1\n");
    let r = check_ssc(&i, None, &[vec![0.0, 1.0]], None, &SscOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Holds, "{r:?}");
    let p = r.point.unwrap();
    assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
    assert!(p[0] - p[1] + 1.0 < 0.0);
    // a candidate off the affine set is rejected
    let r = check_ssc(&i, Some(&[-5.0, 0.0]), &[], None, &SscOptions { random_starts: 0, ..Default::default() }).unwrap();
    assert!(!r.notes.is_empty());
}

#[test]
fn summary_of_countable_example() {
    let r = cq_summary(&ex37(), &[-1.0, 0.0], &CqOptions::default()).unwrap();
    assert_eq!(
        [r.emfcq.verdict, r.pmfcq.verdict, r.nfmcq.verdict, r.ssc.verdict],
        [Verdict::Holds, Verdict::Holds, Verdict::Fails, Verdict::Unknown]
    );
    assert_eq!(r.ssc.reason, "nonconvex");
}

#[test]
fn summary_of_interval_example() {
    let r = cq_summary(&ex35(), &[-1.0, 0.0], &CqOptions::default()).unwrap();
    assert_eq!(
        [r.emfcq.verdict, r.pmfcq.verdict, r.nfmcq.verdict, r.ssc.verdict],
        [Verdict::Holds, Verdict::Fails, Verdict::Holds, Verdict::Unknown]
    );
}

#[test]
fn summary_of_finite_orthant() {
    let i = inst("[problem]\nvars = x1 x2\n[index k]\nkind = finite\nvalues = a:1 b:2\n[constraints]\ng(k) = (2-k)*x1 + (k-1)*x2\n");
    let r = cq_summary(&i, &[0.0, 0.0], &CqOptions::default()).unwrap();
    assert_eq!(
        [r.emfcq.verdict, r.pmfcq.verdict, r.nfmcq.verdict],
        [Verdict::Holds, Verdict::Holds, Verdict::Holds]
    );
    assert!(r.diagnostics.is_empty());
}

#[test]
fn summary_of_convex_instances() {
    let r = cq_summary(&ex411(), &[0.0, 0.0], &CqOptions::default()).unwrap();
    assert_eq!([r.pmfcq.verdict, r.nfmcq.verdict, r.ssc.verdict], [Verdict::Holds, Verdict::Holds, Verdict::Holds]);
    // x1^2 <= 0 has no Slater point and no descent direction
    let i = inst("[problem]\nvars = x1 x2\nconvex = true\n[constraints]\ng = x1^2\n");
    let r = cq_summary(&i, &[0.0, 0.0], &CqOptions::default()).unwrap();
    assert_eq!(r.pmfcq.verdict, Verdict::Fails);
    assert_eq!(r.ssc.verdict, Verdict::Fails);
}

#[test]
fn summary_rejects_infeasible_point() {
    assert!(matches!(
        cq_summary(&ex37(), &[0.0, 0.0], &CqOptions::default()),
        Err(CqError::Infeasible { .. })
    ));
}

#[test]
fn equalities_restrict_directions() {
    let i = inst("[problem]\nvars = x1 x2\n[constraints]\ng = x1\n[equalities]\nh = x1 + x2\n");
    let r = cq_summary(&i, &[0.0, 0.0], &CqOptions::default()).unwrap();
    assert_eq!(r.emfcq.verdict, Verdict::Holds);
    assert!((r.emfcq.direction[0] + r.emfcq.direction[1]).abs() < 1e-12);
    assert_eq!(r.nfmcq.scope, "inequality-part");
    let i = inst("[problem]\nvars = x1 x2\n[constraints]\ng = x1\n[equalities]\nh = x1\n");
    let r = check_emfcq(&i, &[0.0, 0.0], DEFAULT_MARGIN_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::Fails);
}
