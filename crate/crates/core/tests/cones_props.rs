use proptest::prelude::*;
use sipcq::cones::{
    accumulation_rays, caratheodory_reduce, closedness_diagnostic, membership, Closedness, GeneratedCone, LabeledVector,
};
use sipcq::linsolve::{dot, norm_inf, ConeAnswer};

fn small() -> impl Strategy<Value = f64> {
    (-4i32..=4).prop_map(|k| k as f64 * 0.5)
}

fn vectors(d: usize, k: usize, raw: &[f64]) -> Vec<Vec<f64>> {
    (0..k).map(|j| raw[j * d..(j + 1) * d].to_vec()).collect()
}

fn labeled(vs: &[Vec<f64>]) -> Vec<LabeledVector> {
    vs.iter().enumerate().map(|(i, v)| LabeledVector::new(format!("g{i}"), v.clone())).collect()
}

/// `(h, L + c h)` for h = 2^-6 .. 2^-21, with alternating signs of `c h`
/// when `wobble`.
fn tail(limit: &[f64], c: &[f64], wobble: bool) -> Vec<(f64, Vec<f64>)> {
    (6..22)
        .map(|k| {
            let h = 0.5f64.powi(k);
            let s = if wobble && k % 2 == 0 { -1.0 } else { 1.0 };
            (h, limit.iter().zip(c).map(|(l, ci)| l + s * ci * h).collect())
        })
        .collect()
}

fn residual(cone: &GeneratedCone, use_rays: bool, lambda: &[f64], y: &[f64], v: &[f64]) -> f64 {
    let g = cone.generator_matrix(use_rays);
    let h = cone.lineality_matrix();
    let r: Vec<f64> = (0..v.len()).map(|i| v[i] - dot(g.row(i), lambda) - dot(h.row(i), y)).collect();
    norm_inf(&r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn membership_answers_verify(
        d in 2usize..=4,
        k in 0usize..=6,
        raw in proptest::collection::vec(small(), 24),
        lin in proptest::collection::vec(small(), 4),
        with_lin in any::<bool>(),
        limit in proptest::collection::vec(small(), 4),
        target in proptest::collection::vec(small(), 4),
    ) {
        let lineality = if with_lin { vec![lin[..d].to_vec()] } else { vec![] };
        let tails = [accumulation_rays("f", &tail(&limit[..d], &raw[..d], false), &[])];
        let cone = GeneratedCone::new(d, labeled(&vectors(d, k, &raw)), lineality).unwrap().attach_rays(&tails).unwrap();
        let v = &target[..d];
        match membership(&cone, v, 1e-9, true).unwrap() {
            ConeAnswer::Member(c) => {
                prop_assert!(c.lambda.iter().all(|l| *l >= 0.0));
                prop_assert!(residual(&cone, true, &c.lambda, &c.y, v) <= 1e-9);
            }
            ConeAnswer::Separated(s) => {
                prop_assert!(dot(&s.functional, v) > 0.0);
                for g in &cone.generators {
                    prop_assert!(dot(&s.functional, &g.vector) <= 1e-9);
                }
                for r in &cone.rays {
                    prop_assert!(dot(&s.functional, &r.direction) <= 1e-9);
                }
                for h in &cone.lineality {
                    prop_assert!(dot(&s.functional, h).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn caratheodory_shrinks_support(
        d in 1usize..=4,
        k in 1usize..=10,
        raw in proptest::collection::vec(small(), 40),
        weights in proptest::collection::vec(0u32..=3, 10),
    ) {
        let gens = vectors(d, k, &raw);
        let v: Vec<f64> = (0..d).map(|i| (0..k).map(|j| weights[j] as f64 * gens[j][i]).sum()).collect();
        let cone = GeneratedCone::new(d, labeled(&gens), vec![]).unwrap();
        let ConeAnswer::Member(cert) = membership(&cone, &v, 1e-9, false).unwrap() else {
            return Err(TestCaseError::fail("constructed member was separated"));
        };
        let red = caratheodory_reduce(&cert, &cone, &v);
        prop_assert!(red.residual <= cert.residual.max(1e-12), "{} after {}", red.residual, cert.residual);
        prop_assert!(residual(&cone, false, &red.lambda, &red.y, &v) <= 1e-9);
        prop_assert!(red.lambda.iter().all(|l| *l >= 0.0));
        prop_assert!(red.lambda.iter().filter(|l| **l > 0.0).count() <= d + 1);
    }

    #[test]
    fn finitely_generated_cones_are_closed(
        d in 1usize..=4,
        k in 0usize..=6,
        raw in proptest::collection::vec(small(), 24),
    ) {
        let v = closedness_diagnostic(&labeled(&vectors(d, k, &raw)), &[]).unwrap();
        prop_assert_eq!(v.status, Closedness::Closed);
    }

    #[test]
    fn declared_rays_never_flip_a_verdict(
        d in 2usize..=3,
        k in 0usize..=4,
        raw in proptest::collection::vec(small(), 12),
        limit in proptest::collection::vec(small(), 3),
        drift in proptest::collection::vec(small(), 3),
        hint in proptest::collection::vec(small(), 3),
        wobble in any::<bool>(),
    ) {
        prop_assume!(norm_inf(&limit[..d]) > 0.0 && norm_inf(&hint[..d]) > 0.0);
        let gens = labeled(&vectors(d, k, &raw));
        let seq = tail(&limit[..d], &drift[..d], wobble);
        let bare = closedness_diagnostic(&gens, &[accumulation_rays("f", &seq, &[])]).unwrap();
        let told = closedness_diagnostic(&gens, &[accumulation_rays("f", &seq, &[hint[..d].to_vec()])]).unwrap();
        let flipped = matches!(
            (bare.status, told.status),
            (Closedness::Closed, Closedness::NotClosed) | (Closedness::NotClosed, Closedness::Closed)
        );
        prop_assert!(!flipped, "{:?} became {:?}", bare.status, told.status);
    }
}
