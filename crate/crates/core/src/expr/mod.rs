//! Expression language for costs and constraints.
//!
//! Expressions are parsed once into an immutable [`Expr`] tree and evaluated
//! either in plain `f64` arithmetic ([`eval`]) or with forward-mode dual
//! numbers carrying one tangent per decision variable ([`grad_x`]). The index
//! variable of a constraint family is a bound parameter and is held constant
//! during differentiation.

mod dual;
mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dual::Dual;
pub use parse::{parse, parse_in, Scope};

/// Largest supported decision dimension.
pub const MAX_VARS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown identifier `{name}` at line {line}, column {column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("function `{name}` takes {expected} argument(s) but {found} were given (line {line}, column {column})")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        line: usize,
        column: usize,
    },
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },
    #[error("index variable `{0}` is not bound")]
    UnboundIndex(String),
    #[error("decision variable x{position} is outside dimension {dim}")]
    VarOutOfRange { position: usize, dim: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub const ALL: [Func; 5] = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt];
}

/// Expression tree. Decision variables are stored zero-based; they print as
/// `x1`, `x2`, ... in canonical form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Index(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// How an expression depends on the decision variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Degree {
    Constant,
    Affine,
    Nonlinear,
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Largest zero-based variable position referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) | Expr::Index(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Binary(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(p), Some(q)) => Some(p.max(q)),
                (p, q) => p.or(q),
            },
        }
    }

    /// Checks that every variable position fits in dimension `n`.
    pub fn validate(&self, n: usize) -> Result<(), ExprError> {
        match self.max_var() {
            Some(p) if p >= n => Err(ExprError::VarOutOfRange {
                position: p + 1,
                dim: n,
            }),
            _ => Ok(()),
        }
    }

    pub fn index_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_indices(&mut out);
        out
    }

    fn collect_indices(&self, out: &mut Vec<String>) {
        match self {
            Expr::Index(name) => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_indices(out),
            Expr::Binary(_, a, b) => {
                a.collect_indices(out);
                b.collect_indices(out);
            }
        }
    }

    /// Structural degree in x. Index variables count as constants.
    pub fn degree(&self) -> Degree {
        use Degree::*;
        match self {
            Expr::Const(_) | Expr::Index(_) => Constant,
            Expr::Var(_) => Affine,
            Expr::Neg(a) => a.degree(),
            Expr::Call(_, a) => match a.degree() {
                Constant => Constant,
                _ => Nonlinear,
            },
            Expr::Binary(op, a, b) => {
                let (da, db) = (a.degree(), b.degree());
                match op {
                    BinOp::Add | BinOp::Sub => da.max(db),
                    BinOp::Mul => match (da, db) {
                        (Constant, d) | (d, Constant) => d,
                        _ => Nonlinear,
                    },
                    BinOp::Div => match db {
                        Constant => da,
                        _ => Nonlinear,
                    },
                    BinOp::Pow => match (da, db, b.as_ref()) {
                        (Constant, Constant, _) => Constant,
                        (Affine, Constant, Expr::Const(e)) if *e == 1.0 => Affine,
                        (_, _, Expr::Const(e)) if *e == 0.0 => Constant,
                        _ => Nonlinear,
                    },
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Index(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }
}

/// Canonical, fully parenthesized form. Re-parsing it with [`parse`] yields a
/// structurally equal tree as long as the tree holds no negative constants
/// (the parser never produces them).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 => write!(f, "(-{:?})", -c),
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Index(name) => f.write_str(name),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// Values for the decision vector and any bound index variables.
#[derive(Clone, Copy, Debug)]
pub struct Bindings<'a> {
    pub x: &'a [f64],
    pub index: &'a [(&'a str, f64)],
}

impl<'a> Bindings<'a> {
    pub fn new(x: &'a [f64]) -> Self {
        Bindings { x, index: &[] }
    }

    pub fn with_index(x: &'a [f64], index: &'a [(&'a str, f64)]) -> Self {
        Bindings { x, index }
    }

    fn lookup(&self, name: &str) -> Result<f64, ExprError> {
        self.index
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| ExprError::UnboundIndex(name.to_string()))
    }
}

/// Arithmetic carrier for the shared evaluator.
trait Scalar: Copy {
    fn constant(c: f64) -> Self;
    fn variable(x: f64, pos: usize) -> Self;
    fn value(&self) -> f64;
    /// True when the quantity carries no dependence on x.
    fn is_constant(&self) -> bool;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn div(self, o: Self) -> Self;
    fn neg(self) -> Self;
    fn powi(self, k: i32) -> Self;
    fn powf(self, e: Self) -> Self;
    fn apply(self, f: Func) -> Self;
    fn is_finite(&self) -> bool;
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn variable(x: f64, _pos: usize) -> Self {
        x
    }
    fn value(&self) -> f64 {
        *self
    }
    fn is_constant(&self) -> bool {
        true
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
    fn neg(self) -> Self {
        -self
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
    fn powf(self, e: Self) -> Self {
        (e * self.ln()).exp()
    }
    fn apply(self, f: Func) -> Self {
        match f {
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Exp => self.exp(),
            Func::Log => self.ln(),
            Func::Sqrt => self.sqrt(),
        }
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

fn domain(expr: &Expr, reason: &str) -> ExprError {
    ExprError::Domain {
        expr: expr.to_string(),
        reason: reason.to_string(),
    }
}

/// An exponent value that is evaluated by repeated multiplication.
fn integer_exponent(e: f64) -> Option<i32> {
    if e.fract() == 0.0 && e.abs() <= 1024.0 {
        Some(e as i32)
    } else {
        None
    }
}

fn eval_with<S: Scalar>(expr: &Expr, b: &Bindings<'_>, strict_x: bool) -> Result<S, ExprError> {
    let out = match expr {
        Expr::Const(c) => S::constant(*c),
        Expr::Var(i) => {
            let x = *b.x.get(*i).ok_or(ExprError::VarOutOfRange {
                position: i + 1,
                dim: b.x.len(),
            })?;
            S::variable(x, *i)
        }
        Expr::Index(name) => S::constant(b.lookup(name)?),
        Expr::Neg(a) => eval_with::<S>(a, b, strict_x)?.neg(),
        Expr::Call(func, a) => {
            let arg = eval_with::<S>(a, b, strict_x)?;
            let v = arg.value();
            match func {
                Func::Log if v <= 0.0 => return Err(domain(expr, "log of a nonpositive value")),
                Func::Sqrt if v < 0.0 => return Err(domain(expr, "sqrt of a negative value")),
                Func::Sqrt if v == 0.0 && strict_x && !arg.is_constant() => {
                    return Err(domain(expr, "sqrt is not differentiable at 0"))
                }
                _ => {}
            }
            arg.apply(*func)
        }
        Expr::Binary(op, lhs, rhs) => {
            let l = eval_with::<S>(lhs, b, strict_x)?;
            let r = eval_with::<S>(rhs, b, strict_x)?;
            match op {
                BinOp::Add => l.add(r),
                BinOp::Sub => l.sub(r),
                BinOp::Mul => l.mul(r),
                BinOp::Div => {
                    if r.value() == 0.0 {
                        return Err(domain(expr, "division by zero"));
                    }
                    l.div(r)
                }
                BinOp::Pow => {
                    let base = l.value();
                    let x_free = rhs.degree() == Degree::Constant;
                    match integer_exponent(r.value()).filter(|_| x_free) {
                        Some(k) => {
                            if base == 0.0 && k < 0 {
                                return Err(domain(expr, "zero raised to a negative power"));
                            }
                            l.powi(k)
                        }
                        None => {
                            if base <= 0.0 {
                                return Err(domain(
                                    expr,
                                    "non-integer exponent requires a positive base",
                                ));
                            }
                            l.powf(r)
                        }
                    }
                }
            }
        }
    };
    if !out.is_finite() {
        return Err(domain(expr, "non-finite result"));
    }
    Ok(out)
}

/// Evaluates `expr` in IEEE double precision.
pub fn eval(expr: &Expr, b: &Bindings<'_>) -> Result<f64, ExprError> {
    eval_with::<f64>(expr, b, false)
}

/// Value and gradient with respect to x, by forward-mode propagation.
pub fn value_grad(expr: &Expr, b: &Bindings<'_>) -> Result<(f64, Vec<f64>), ExprError> {
    if b.x.len() > MAX_VARS {
        return Err(ExprError::VarOutOfRange {
            position: b.x.len(),
            dim: MAX_VARS,
        });
    }
    let d: Dual = eval_with(expr, b, true)?;
    Ok((d.re, d.tangent(b.x.len())))
}

/// Gradient with respect to x.
pub fn grad_x(expr: &Expr, b: &Bindings<'_>) -> Result<Vec<f64>, ExprError> {
    value_grad(expr, b).map(|(_, g)| g)
}
