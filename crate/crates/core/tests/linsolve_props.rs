mod common;

use common::{slack_lp, vertex_oracle};
use proptest::prelude::*;
use sipcq::linsolve::{
    cone_feasibility, dot, max_margin_direction, norm_inf, rank_nullspace, simplex_solve, ConeAnswer, LpStatus,
    Matrix,
};

fn small() -> impl Strategy<Value = f64> {
    (-4i32..=4).prop_map(|k| k as f64 * 0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplex_matches_vertex_enumeration(
        n in 1usize..=5,
        m in 1usize..=6,
        seed in proptest::collection::vec(small(), 40),
        rhs in proptest::collection::vec(-3i32..=6, 6),
    ) {
        let mut it = seed.into_iter();
        let c: Vec<f64> = (0..n).map(|_| it.next().unwrap()).collect();
        let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| it.next().unwrap()).collect()).collect();
        let b: Vec<f64> = rhs[..m].iter().map(|&v| v as f64).collect();
        let p = slack_lp(&c, &a, &b);
        let sol = simplex_solve(&p).unwrap();
        match vertex_oracle(&c, &a, &b) {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() <= 1e-8, "{} vs {}", sol.objective, best);
                // multipliers of <= rows are nonpositive
                for y in &sol.duals {
                    prop_assert!(*y <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn kernel_vectors_are_annihilated(
        r in 1usize..=4,
        c in 1usize..=5,
        entries in proptest::collection::vec(-3i32..=3, 20),
    ) {
        let rows: Vec<Vec<f64>> = (0..r).map(|i| (0..c).map(|j| entries[i * c + j] as f64).collect()).collect();
        let m = Matrix::from_rows(&rows, c);
        let (rank, ker) = rank_nullspace(&m, 1e-9);
        prop_assert_eq!(rank + ker.len(), c);
        for v in &ker {
            prop_assert!(norm_inf(&m.mul_vec(v)) <= 10.0 * 1e-9 * m.norm_inf().max(1.0));
        }
        for (i, u) in ker.iter().enumerate() {
            for w in &ker[i + 1..] {
                prop_assert!(dot(u, w).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cone_answers_are_certified(
        d in 1usize..=4,
        k in 0usize..=5,
        gens in proptest::collection::vec(small(), 20),
        target in proptest::collection::vec(small(), 4),
        lam in proptest::collection::vec(0u32..=3, 5),
        inside in any::<bool>(),
    ) {
        let cols: Vec<Vec<f64>> = (0..k).map(|j| gens[j * d..(j + 1) * d].to_vec()).collect();
        let g = Matrix::from_columns(d, &cols);
        let v: Vec<f64> = if inside {
            (0..d).map(|i| (0..k).map(|j| lam[j] as f64 * cols[j][i]).sum()).collect()
        } else {
            target[..d].to_vec()
        };
        let ans = cone_feasibility(&g, &Matrix::zeros(d, 0), &v, 1e-9).unwrap();
        match ans {
            ConeAnswer::Member(cert) => {
                prop_assert!(cert.lambda.iter().all(|l| *l >= 0.0));
                let mut r = v.clone();
                for (j, c) in cols.iter().enumerate() {
                    for i in 0..d { r[i] -= cert.lambda[j] * c[i]; }
                }
                prop_assert!(norm_inf(&r) <= 1e-9);
            }
            ConeAnswer::Separated(s) => {
                prop_assert!(!inside);
                prop_assert!(dot(&s.functional, &v) > 0.0);
                for c in &cols {
                    prop_assert!(dot(&s.functional, c) <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn margin_agrees_with_convex_hull_test(
        d in 1usize..=3,
        k in 1usize..=5,
        gens in proptest::collection::vec(small(), 15),
    ) {
        let cols: Vec<Vec<f64>> = (0..k).map(|j| gens[j * d..(j + 1) * d].to_vec()).collect();
        let g = Matrix::from_columns(d, &cols);
        let r = max_margin_direction(&g, &Matrix::zeros(d, 0)).unwrap();
        prop_assert!(norm_inf(&r.direction) <= 1.0 + 1e-12);
        for c in &cols {
            prop_assert!(-dot(c, &r.direction) >= r.margin - 1e-12);
        }
        // positive margin exactly when the origin is outside the convex hull
        let lifted: Vec<Vec<f64>> = cols.iter().map(|c| { let mut l = c.clone(); l.push(1.0); l }).collect();
        let mut e = vec![0.0; d + 1];
        e[d] = 1.0;
        let hull = cone_feasibility(&Matrix::from_columns(d + 1, &lifted), &Matrix::zeros(d + 1, 0), &e, 1e-9).unwrap();
        prop_assert_eq!(r.margin > 1e-9, !hull.is_member(), "margin {}", r.margin);
    }
}
