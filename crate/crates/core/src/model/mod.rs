//! Problem instances, index materialization, active sets and moduli.

mod format;
mod materialize;
mod moduli;
mod sample;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, Bindings, Degree, Expr, ExprError, MAX_VARS};

pub use format::{load_instance, parse_instance};
pub use materialize::{
    active_set, active_set_in, evaluate_index, family_tails, index_label, feasibility_check, gradient_bound_check, materialize, ActiveSetReport,
    Feasibility, FamilyTail, GradientBound, IndexEntry, MaterializeOptions, Materialization, Resolution, Source,
    TailPoint, ACTIVE_TOL, CLOSURE_DEPTH,
};
pub(crate) use materialize::feasibility_in;
pub use moduli::{estimate_moduli, UniformityModuli};
pub(crate) use moduli::uniform_in_ball;
pub use sample::IndexSample;

pub const DEFAULT_RESOLUTION: usize = 257;
pub const DEFAULT_LEVELS: usize = 4;
pub const DEFAULT_TRUNCATION: u64 = 10_000;
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Expr { line: usize, source: ExprError },
    #[error("invalid instance: {0}")]
    Validation(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("evaluating {label}: {source}")]
    Eval { label: String, source: ExprError },
    #[error("index set of family `{0}` materializes to no indices")]
    EmptyMaterialization(String),
    #[error("point has {found} components, expected {expected}")]
    Dimension { expected: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum IndexSetDescriptor {
    Finite {
        values: Vec<(String, f64)>,
    },
    Interval {
        lower: f64,
        upper: f64,
        include_lower: bool,
        include_upper: bool,
        resolution: usize,
        levels: usize,
    },
    Countable {
        start: u64,
        truncation: u64,
        /// Declared limits of the gradient direction as the index grows.
        limit_rays: Vec<Vec<f64>>,
    },
}

impl IndexSetDescriptor {
    pub fn validate(&self, n: usize) -> Result<(), String> {
        match self {
            IndexSetDescriptor::Finite { values } => {
                if values.is_empty() {
                    return Err("finite index set has no values".into());
                }
                if values.iter().any(|(_, v)| !v.is_finite()) {
                    return Err("finite index values must be finite".into());
                }
            }
            IndexSetDescriptor::Interval {
                lower,
                upper,
                resolution,
                ..
            } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return Err(format!("interval needs finite lower < upper, got [{lower}, {upper}]"));
                }
                if *resolution < 2 {
                    return Err("interval resolution must be at least 2".into());
                }
            }
            IndexSetDescriptor::Countable {
                start,
                truncation,
                limit_rays,
            } => {
                if truncation < start {
                    return Err(format!("truncation {truncation} is below start {start}"));
                }
                for r in limit_rays {
                    if r.len() != n {
                        return Err(format!("limit ray has {} components, expected {n}", r.len()));
                    }
                    if r.iter().all(|v| *v == 0.0) || r.iter().any(|v| !v.is_finite()) {
                        return Err("limit ray must be finite and nonzero".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether the family ranges over finitely many indices.
    pub fn is_finite(&self) -> bool {
        matches!(self, IndexSetDescriptor::Finite { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            IndexSetDescriptor::Finite { .. } => "finite",
            IndexSetDescriptor::Interval { .. } => "interval",
            IndexSetDescriptor::Countable { .. } => "countable",
        }
    }
}

/// A single named expression, used for fixed constraints and equalities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedExpr {
    pub name: String,
    pub body: Expr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFamily {
    pub name: String,
    pub index: String,
    pub body: Expr,
    pub set: IndexSetDescriptor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Cost {
    Smooth(Expr),
    /// Pointwise maximum of smooth convex pieces.
    ConvexMax(Vec<Expr>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EqualityBlock {
    pub components: Vec<NamedExpr>,
    pub affine: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SipInstance {
    pub vars: Vec<String>,
    pub cost: Cost,
    pub fixed: Vec<NamedExpr>,
    pub families: Vec<ConstraintFamily>,
    pub equalities: EqualityBlock,
    /// Declared convexity of every inequality function.
    pub convex: bool,
    /// Multistart box, one `(lo, hi)` per variable.
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Raw `[solver]` section entries.
    pub solver_options: Vec<(String, String)>,
}

impl SipInstance {
    pub fn n(&self) -> usize {
        self.vars.len()
    }

    pub fn m(&self) -> usize {
        self.equalities.components.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.n();
        let bad = |s: String| Err(ModelError::Validation(s));
        if n == 0 {
            return bad("no decision variables".into());
        }
        if n > MAX_VARS {
            return bad(format!("{n} variables exceed the supported maximum of {MAX_VARS}"));
        }
        if self.m() >= n {
            return bad(format!(
                "{} equalities for {n} variables; at most {} are allowed",
                self.m(),
                n - 1
            ));
        }
        let check = |what: &str, e: &Expr, allowed: &[&str]| -> Result<(), ModelError> {
            e.validate(n)
                .map_err(|err| ModelError::Validation(format!("{what}: {err}")))?;
            if let Some(name) = e.index_names().into_iter().find(|i| !allowed.contains(&i.as_str())) {
                return Err(ModelError::Validation(format!("{what}: index `{name}` is not bound here")));
            }
            Ok(())
        };
        match &self.cost {
            Cost::Smooth(e) => check("cost", e, &[])?,
            Cost::ConvexMax(pieces) => {
                if pieces.is_empty() {
                    return bad("minimize_max needs at least one piece".into());
                }
                for p in pieces {
                    check("cost piece", p, &[])?;
                }
            }
        }
        for c in &self.fixed {
            check(&c.name, &c.body, &[])?;
        }
        for f in &self.families {
            check(&f.name, &f.body, &[f.index.as_str()])?;
            f.set
                .validate(n)
                .map_err(|s| ModelError::Validation(format!("{}: {s}", f.name)))?;
        }
        for h in &self.equalities.components {
            check(&h.name, &h.body, &[])?;
            if self.equalities.affine && h.body.degree() == Degree::Nonlinear {
                return bad(format!("equality {} is declared affine but is nonlinear", h.name));
            }
        }
        if let Some(b) = &self.bounds {
            if b.len() != n {
                return bad(format!("box has {} intervals, expected {n}", b.len()));
            }
            if b.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
                return bad("box intervals need finite lo < hi".into());
            }
        }
        let mut names: Vec<&str> = self.fixed.iter().map(|c| c.name.as_str()).collect();
        names.extend(self.families.iter().map(|f| f.name.as_str()));
        names.extend(self.equalities.components.iter().map(|h| h.name.as_str()));
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate constraint name `{}`", w[0]));
        }
        Ok(())
    }

    pub fn check_point(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.n() {
            return Err(ModelError::Dimension {
                expected: self.n(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Cost value; for `ConvexMax` the maximum over pieces.
    pub fn cost_value(&self, x: &[f64]) -> Result<f64, ModelError> {
        let b = Bindings::new(x);
        let ev = |e: &Expr| {
            expr::eval(e, &b).map_err(|source| ModelError::Eval {
                label: "cost".into(),
                source,
            })
        };
        match &self.cost {
            Cost::Smooth(e) => ev(e),
            Cost::ConvexMax(pieces) => pieces.iter().try_fold(f64::NEG_INFINITY, |m, p| Ok(m.max(ev(p)?))),
        }
    }

    /// Values and gradients of every cost piece (a single piece when smooth).
    pub fn cost_pieces(&self, x: &[f64]) -> Result<Vec<(f64, Vec<f64>)>, ModelError> {
        let b = Bindings::new(x);
        let pieces: Vec<&Expr> = match &self.cost {
            Cost::Smooth(e) => vec![e],
            Cost::ConvexMax(p) => p.iter().collect(),
        };
        pieces
            .into_iter()
            .map(|e| {
                expr::value_grad(e, &b).map_err(|source| ModelError::Eval {
                    label: "cost".into(),
                    source,
                })
            })
            .collect()
    }

    /// Equality values and Jacobian rows.
    pub fn equality_jacobian(&self, x: &[f64]) -> Result<Vec<(f64, Vec<f64>)>, ModelError> {
        let b = Bindings::new(x);
        self.equalities
            .components
            .iter()
            .map(|h| {
                expr::value_grad(&h.body, &b).map_err(|source| ModelError::Eval {
                    label: h.name.clone(),
                    source,
                })
            })
            .collect()
    }

    pub fn equality_residual(&self, x: &[f64]) -> Result<f64, ModelError> {
        Ok(self
            .equality_jacobian(x)?
            .iter()
            .fold(0.0, |m, (v, _)| m.max(v.abs())))
    }

    /// Whether every inequality and equality is affine in x.
    pub fn is_affine(&self) -> bool {
        self.fixed.iter().all(|c| c.body.degree() <= Degree::Affine)
            && self.families.iter().all(|f| f.body.degree() <= Degree::Affine)
            && self.equalities.components.iter().all(|h| h.body.degree() <= Degree::Affine)
    }

    /// Gauss-Newton steps `p -= J⁺ h(p)` toward the equality set. Returns
    /// whether the residual fell to `tol`; `p` is left at the last iterate.
    pub fn restore_equalities(&self, p: &mut [f64], tol: f64) -> Result<bool, ModelError> {
        for _ in 0..12 {
            let jac = self.equality_jacobian(p)?;
            let h: Vec<f64> = jac.iter().map(|(v, _)| *v).collect();
            if h.iter().all(|v| v.abs() <= tol) {
                return Ok(true);
            }
            let rows: Vec<&[f64]> = jac.iter().map(|(_, g)| g.as_slice()).collect();
            let m = rows.len();
            let gram: Vec<Vec<f64>> = (0..m).map(|j| (0..m).map(|i| crate::linsolve::dot(rows[i], rows[j])).collect()).collect();
            let cols: Vec<&[f64]> = gram.iter().map(Vec::as_slice).collect();
            let Some(w) = crate::linsolve::least_squares(&cols, &h) else {
                return Ok(false);
            };
            for (wi, row) in w.iter().zip(&rows) {
                for (x, a) in p.iter_mut().zip(row.iter()) {
                    *x -= wi * a;
                }
            }
        }
        Ok(self.equality_residual(p)? <= tol)
    }

    pub fn has_equalities(&self) -> bool {
        !self.equalities.components.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn inst() -> SipInstance {
        SipInstance {
            vars: vec!["x1".into(), "x2".into()],
            cost: Cost::Smooth(parse("(x1+1)^2 + x2").unwrap()),
            fixed: vec![NamedExpr {
                name: "g1".into(),
                body: parse("x1 + 1").unwrap(),
            }],
            families: vec![],
            equalities: EqualityBlock::default(),
            convex: false,
            bounds: None,
            solver_options: vec![],
        }
    }

    #[test]
    fn valid_instance() {
        inst().validate().unwrap();
    }

    #[test]
    fn too_many_equalities() {
        let mut i = inst();
        for k in 0..2 {
            i.equalities.components.push(NamedExpr {
                name: format!("h{k}"),
                body: parse("x1").unwrap(),
            });
        }
        assert!(matches!(i.validate(), Err(ModelError::Validation(_))));
    }

    #[test]
    fn declared_affine_must_be_affine() {
        let mut i = inst();
        i.equalities = EqualityBlock {
            components: vec![NamedExpr {
                name: "h".into(),
                body: parse("x1*x2").unwrap(),
            }],
            affine: true,
        };
        assert!(i.validate().is_err());
    }

    #[test]
    fn unbound_index_rejected() {
        let mut i = inst();
        i.fixed[0].body = parse("x1 + n").unwrap();
        assert!(i.validate().is_err());
    }

    #[test]
    fn convex_max_cost() {
        let mut i = inst();
        i.cost = Cost::ConvexMax(vec![parse("x1").unwrap(), parse("-x1").unwrap()]);
        assert_eq!(i.cost_value(&[-2.0, 0.0]).unwrap(), 2.0);
        assert_eq!(i.cost_pieces(&[1.0, 0.0]).unwrap().len(), 2);
    }
}
