//! Oracles and instance generators shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sipcq::expr::{eval, parse, Bindings, Expr};
use sipcq::linsolve::dot;
use sipcq::model::{load_instance, parse_instance, SipInstance};

pub fn instance(name: &str) -> SipInstance {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../instances").join(name);
    load_instance(&p).unwrap()
}

/// Solves a small dense system by Gaussian elimination, None when singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for i in col + 1..n {
            let f = a[i][col] / a[col][col];
            for k in col..n {
                a[i][k] -= f * a[col][k];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// min c·x over {A x <= b, -5 <= x <= 5} by enumerating vertices.
pub fn vertex_oracle(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let n = c.len();
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().cloned()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e.clone(), 5.0));
        e[j] = -1.0;
        rows.push((e, 5.0));
    }
    let mut best: Option<f64> = None;
    for s in subsets(rows.len(), n) {
        let sa = s.iter().map(|&i| rows[i].0.clone()).collect();
        let sb = s.iter().map(|&i| rows[i].1).collect();
        if let Some(x) = solve_dense(sa, sb) {
            if rows.iter().all(|(r, bi)| dot(r, &x) <= bi + 1e-8) {
                let v = dot(c, &x);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    }
    best
}

/// Central difference of `expr` along each coordinate with step `h`.
pub fn central_difference(expr: &Expr, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            let fp = eval(expr, &Bindings::new(&p)).unwrap();
            let fm = eval(expr, &Bindings::new(&m)).unwrap();
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| <= rel * max(|a|, |b|)`, or `<= abs` when both are near zero.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    let d = (a - b).abs();
    d <= abs || d <= rel * a.abs().max(b.abs())
}

/// Random expression text over `x1..x{n}` that is defined and smooth
/// everywhere: logarithms, roots and denominators are shifted squares.
pub fn random_smooth_expr(rng: &mut ChaCha8Rng, n: usize, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.7) {
            format!("x{}", rng.gen_range(1..=n))
        } else {
            format!("{:.3}", rng.gen_range(0.5..3.0))
        };
    }
    let sub = |rng: &mut ChaCha8Rng| random_smooth_expr(rng, n, depth - 1);
    let shift = format!("{:.3}", rng.gen_range(0.5..2.0));
    match rng.gen_range(0..11) {
        0 => format!("({} + {})", sub(rng), sub(rng)),
        1 => format!("({} - {})", sub(rng), sub(rng)),
        2 => format!("({} * {})", sub(rng), sub(rng)),
        3 => format!("({} / ({shift} + ({})^2))", sub(rng), sub(rng)),
        4 => format!("({})^2", sub(rng)),
        5 => format!("({})^3", sub(rng)),
        6 => format!("sin({})", sub(rng)),
        7 => format!("cos({})", sub(rng)),
        8 => format!("exp(sin({}))", sub(rng)),
        9 => format!("log({shift} + ({})^2)", sub(rng)),
        _ => format!("sqrt({shift} + ({})^2)", sub(rng)),
    }
}

pub fn parse_expr(s: &str) -> Expr {
    parse(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

pub fn coef(c: f64) -> String {
    format!("({c:.4})")
}

/// Convex interval family `g_t(x) = α(t)|x|^2 + <a(t), x> + b(t)` on
/// `[0, 1]`, feasible at the origin. One seed in three gives a gradient that
/// vanishes at the active index; every other seed is inactive at the origin.
pub fn convex_family(seed: u64) -> SipInstance {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |lo: f64, hi: f64| rng.gen_range(lo..hi);
    let (a0, a1) = (u(0.0, 1.0), u(0.0, 1.0));
    let t0 = u(0.0, 1.0);
    let beta = u(0.1, 2.0);
    let gap = if seed.is_multiple_of(2) { 0.0 } else { u(0.01, 0.5) };
    let (grad1, grad2) = if seed.is_multiple_of(3) {
        let (v1, v2) = (u(-1.0, 1.0), u(-1.0, 1.0));
        (format!("{}*(t - {})", coef(v1), coef(t0)), format!("{}*(t - {})", coef(v2), coef(t0)))
    } else {
        let (p0, p1, q0, q1) = (u(-1.0, 1.0), u(-1.0, 1.0), u(-1.0, 1.0), u(-1.0, 1.0));
        (format!("({} + {}*t)", coef(p0), coef(p1)), format!("({} + {}*t)", coef(q0), coef(q1)))
    };
    let src = format!(
        "[problem]\nvars = x1 x2\nconvex = true\nbox = -2 2 ; -2 2\n[index t]\nkind = interval\nlower = 0\nupper = 1\n[constraints]\n\
         g(t) = ({} + {}*t)*(x1^2 + x2^2) + {grad1}*x1 + {grad2}*x2 - {}*(t - {})^2 - {}\n",
        coef(a0),
        coef(a1),
        coef(beta),
        coef(t0),
        coef(gap)
    );
    parse_instance(&src).unwrap_or_else(|e| panic!("{src}: {e}"))
}

/// Finitely many constraints in three variables, feasible at the origin,
/// with roughly half of them active there.
pub fn finite_instance(rng: &mut ChaCha8Rng) -> SipInstance {
    let m = rng.gen_range(2..=5);
    let mut src = String::from("[problem]\nvars = x1 x2 x3\n");
    let family = rng.gen_bool(0.5);
    if family {
        src.push_str("[index k]\nkind = finite\nvalues = a:1 b:2 c:3\n");
    }
    src.push_str("[constraints]\n");
    for i in 0..m {
        let c: Vec<String> = (0..3).map(|_| coef(rng.gen_range(-1.0..1.0))).collect();
        let q = coef(rng.gen_range(-0.5..0.5));
        let b = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.1..1.0) };
        src.push_str(&format!(
            "g{i} = {}*x1 + {}*x2 + {}*x3 + {q}*(x1^2 + x2^2 + x3^2) - {}\n",
            c[0],
            c[1],
            c[2],
            coef(b)
        ));
    }
    if family {
        src.push_str("f(k) = k*x1 - x2 - k\n");
    }
    parse_instance(&src).unwrap_or_else(|e| panic!("{src}: {e}"))
}

/// `min c·x` over `A x <= b`, `-5 <= x <= 5`, in slack form.
pub fn slack_lp(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> sipcq::linsolve::LpProblem {
    let (n, m) = (c.len(), a.len());
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut r = a[i].clone();
            r.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let mut objective = c.to_vec();
    objective.extend(vec![0.0; m]);
    let mut lower = vec![-5.0; n];
    lower.extend(vec![0.0; m]);
    let mut upper = vec![5.0; n];
    upper.extend(vec![f64::INFINITY; m]);
    sipcq::linsolve::LpProblem {
        objective,
        a_eq: sipcq::linsolve::Matrix::from_rows(&rows, n + m),
        b_eq: b.to_vec(),
        lower,
        upper,
    }
}

/// Symbolic partial derivative with respect to the zero-based variable `i`.
/// Exponents must be constants.
pub fn derivative(e: &Expr, i: usize) -> Expr {
    use sipcq::expr::{BinOp, Func};
    let c = Expr::Const;
    let b = |op, l: Expr, r: Expr| Expr::binary(op, l, r);
    let call = |f, a: Expr| Expr::Call(f, Box::new(a));
    match e {
        Expr::Const(_) | Expr::Index(_) => c(0.0),
        Expr::Var(j) => c(if *j == i { 1.0 } else { 0.0 }),
        Expr::Neg(a) => Expr::Neg(Box::new(derivative(a, i))),
        Expr::Binary(op, l, r) => {
            let (dl, dr) = (derivative(l, i), derivative(r, i));
            let (l, r) = ((**l).clone(), (**r).clone());
            match op {
                BinOp::Add => b(BinOp::Add, dl, dr),
                BinOp::Sub => b(BinOp::Sub, dl, dr),
                BinOp::Mul => b(BinOp::Add, b(BinOp::Mul, dl, r.clone()), b(BinOp::Mul, l, dr)),
                BinOp::Div => b(
                    BinOp::Div,
                    b(BinOp::Sub, b(BinOp::Mul, dl, r.clone()), b(BinOp::Mul, l, dr)),
                    b(BinOp::Mul, r.clone(), r),
                ),
                BinOp::Pow => {
                    let Expr::Const(p) = r else { panic!("non-constant exponent") };
                    b(BinOp::Mul, b(BinOp::Mul, c(p), b(BinOp::Pow, l, c(p - 1.0))), dl)
                }
            }
        }
        Expr::Call(f, a) => {
            let da = derivative(a, i);
            let a = (**a).clone();
            let outer = match f {
                Func::Sin => call(Func::Cos, a),
                Func::Cos => Expr::Neg(Box::new(call(Func::Sin, a))),
                Func::Exp => call(Func::Exp, a),
                Func::Log => b(BinOp::Div, c(1.0), a),
                Func::Sqrt => b(BinOp::Div, c(0.5), call(Func::Sqrt, a)),
            };
            b(BinOp::Mul, outer, da)
        }
    }
}
