//! Finite index sets standing in for the (possibly infinite) index set.
//!
//! Every family is expanded once per point into entries carrying a
//! refinement `level` (grid points, bisection points around maximizers of
//! `g_t(x)`) and/or an approach `depth` (points converging to an excluded
//! interval endpoint or to infinity). Queries then select a nested subset with
//! a [`Resolution`], so coarser selections are always contained in finer ones.

use serde::{Deserialize, Serialize};

use crate::expr::{value_grad, Bindings};
use crate::linsolve::norm2;

use super::{IndexSetDescriptor, ModelError, SipInstance, DEFAULT_LEVELS};

/// Slack added to the activity threshold to absorb roundoff.
pub const ACTIVE_TOL: f64 = 1e-9;
/// Depth tag of limit entries (endpoint or `n = ∞` evaluations). They are
/// closure points of the index set, not members of it.
pub const CLOSURE_DEPTH: u32 = u32::MAX;
const MAX_APPROACH_DEPTH: u32 = 64;
const COUNTABLE_LIMIT: f64 = 1e150;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Fixed(usize),
    Family(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub label: String,
    pub source: Source,
    pub t: Option<f64>,
    pub level: Option<u32>,
    pub depth: Option<u32>,
    pub value: f64,
    pub grad: Vec<f64>,
}

impl IndexEntry {
    pub fn included(&self, r: Resolution) -> bool {
        self.level.is_some_and(|l| l <= r.level) || self.depth.is_some_and(|d| d <= r.depth)
    }

    pub fn grad_norm(&self) -> f64 {
        norm2(&self.grad)
    }

    pub fn is_limit(&self) -> bool {
        self.depth == Some(CLOSURE_DEPTH)
    }
}

/// Which entries of a [`Materialization`] a query sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub level: u32,
    pub depth: u32,
}

impl Resolution {
    pub fn new(level: u32, depth: u32) -> Self {
        Resolution { level, depth }
    }

    /// Everything, including limit entries.
    pub const CLOSURE: Resolution = Resolution {
        level: u32::MAX,
        depth: CLOSURE_DEPTH,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterializeOptions {
    /// Overrides the truncation of every countable family.
    pub truncation: Option<u64>,
    /// Local maximizers of `t -> g_t(x)` refined per interval family.
    pub top_k: usize,
    pub max_depth: u32,
    pub closure: bool,
}

impl Default for MaterializeOptions {
    fn default() -> Self {
        MaterializeOptions {
            truncation: None,
            top_k: 8,
            max_depth: MAX_APPROACH_DEPTH,
            closure: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Materialization {
    pub point: Vec<f64>,
    pub entries: Vec<IndexEntry>,
    /// Refinement levels used by the default analysis resolution.
    pub levels: u32,
}

impl Materialization {
    pub fn select(&self, r: Resolution) -> impl Iterator<Item = &IndexEntry> {
        self.entries.iter().filter(move |e| e.included(r))
    }

    /// Bisection levels and approach depth both equal to the refinement count.
    pub fn analysis_resolution(&self) -> Resolution {
        Resolution::new(self.levels, self.levels)
    }

    pub fn max_value(&self, r: Resolution) -> Option<&IndexEntry> {
        let mut best: Option<&IndexEntry> = None;
        for e in self.select(r) {
            if best.is_none_or(|b| e.value > b.value) {
                best = Some(e);
            }
        }
        best
    }
}

fn fmt_t(t: f64) -> String {
    if t == f64::INFINITY {
        "inf".into()
    } else {
        format!("{t}")
    }
}

struct Builder<'a> {
    inst: &'a SipInstance,
    x: &'a [f64],
}

impl Builder<'_> {
    fn eval_family(&self, fam: usize, t: f64) -> Result<(f64, Vec<f64>), ModelError> {
        let f = &self.inst.families[fam];
        let idx = [(f.index.as_str(), t)];
        value_grad(&f.body, &Bindings::with_index(self.x, &idx)).map_err(|source| ModelError::Eval {
            label: format!("{}({}={})", f.name, f.index, fmt_t(t)),
            source,
        })
    }

    fn entry(&self, fam: usize, t: f64, label: String, level: Option<u32>, depth: Option<u32>) -> Result<IndexEntry, ModelError> {
        let (value, grad) = self.eval_family(fam, t)?;
        Ok(IndexEntry {
            label,
            source: Source::Family(fam),
            t: Some(t),
            level,
            depth,
            value,
            grad,
        })
    }

    fn family_label(&self, fam: usize, t: f64) -> String {
        let f = &self.inst.families[fam];
        format!("{}({}={})", f.name, f.index, fmt_t(t))
    }

    fn limit_label(&self, fam: usize, t: f64) -> String {
        let f = &self.inst.families[fam];
        format!("{}({}->{})", f.name, f.index, fmt_t(t))
    }
}

/// Golden-section search for a maximizer of `f` on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const R: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - R * (hi - lo);
    let mut d = lo + R * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if hi - lo <= 1e-14 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - R * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + R * (hi - lo);
            fd = f(d);
        }
    }
    if fc >= fd { c } else { d }
}

/// Interval grid step.
fn grid_step(lower: f64, upper: f64, resolution: usize) -> f64 {
    (upper - lower) / (resolution - 1) as f64
}

/// Expands every index set at `x`.
pub fn materialize(inst: &SipInstance, x: &[f64], opts: &MaterializeOptions) -> Result<Materialization, ModelError> {
    inst.check_point(x)?;
    let b = Builder { inst, x };
    let mut entries = Vec::new();
    for (i, c) in inst.fixed.iter().enumerate() {
        let (value, grad) = value_grad(&c.body, &Bindings::new(x)).map_err(|source| ModelError::Eval {
            label: c.name.clone(),
            source,
        })?;
        entries.push(IndexEntry {
            label: c.name.clone(),
            source: Source::Fixed(i),
            t: None,
            level: Some(0),
            depth: Some(0),
            value,
            grad,
        });
    }
    let mut levels: Option<u32> = None;
    for (fi, fam) in inst.families.iter().enumerate() {
        let mut fam_entries: Vec<IndexEntry> = Vec::new();
        match &fam.set {
            IndexSetDescriptor::Finite { values } => {
                for (label, t) in values {
                    let mut e = b.entry(fi, *t, format!("{}[{}]", fam.name, label), Some(0), Some(0))?;
                    e.t = Some(*t);
                    fam_entries.push(e);
                }
            }
            IndexSetDescriptor::Interval {
                lower,
                upper,
                include_lower,
                include_upper,
                resolution,
                levels: fam_levels,
            } => {
                levels = Some(levels.unwrap_or(0).max(*fam_levels as u32));
                let (a, bnd) = (*lower, *upper);
                let h = grid_step(a, bnd, *resolution);
                let inside = |t: f64| (t > a || (*include_lower && t == a)) && (t < bnd || (*include_upper && t == bnd));
                let mut base: Vec<(f64, f64)> = Vec::new();
                for i in 0..*resolution {
                    let t = if i + 1 == *resolution { bnd } else { a + i as f64 * h };
                    if inside(t) {
                        let e = b.entry(fi, t, b.family_label(fi, t), Some(0), None)?;
                        base.push((t, e.value));
                        fam_entries.push(e);
                    }
                }
                // bisection around the largest local maximizers of t -> g_t(x)
                let mut maxima: Vec<(usize, f64, f64)> = (0..base.len())
                    .filter(|&i| {
                        let v = base[i].1;
                        (i == 0 || base[i - 1].1 <= v) && (i + 1 == base.len() || base[i + 1].1 <= v)
                    })
                    .map(|i| (i, base[i].0, base[i].1))
                    .collect();
                maxima.sort_by(|p, q| q.2.total_cmp(&p.2).then(p.1.total_cmp(&q.1)));
                maxima.truncate(opts.top_k);
                // interior maximizers are located off the grid as well
                for &(i, _, _) in &maxima {
                    if i == 0 || i + 1 == base.len() {
                        continue;
                    }
                    let t = golden_max(|t| b.eval_family(fi, t).map(|r| r.0).unwrap_or(f64::NEG_INFINITY), base[i - 1].0, base[i + 1].0);
                    if inside(t) {
                        fam_entries.push(b.entry(fi, t, b.family_label(fi, t), Some(0), None)?);
                    }
                }
                let maxima: Vec<(f64, f64)> = maxima.into_iter().map(|m| (m.1, m.2)).collect();
                for (tstar, _) in &maxima {
                    for l in 1..=*fam_levels as u32 {
                        let off = h * 0.5f64.powi(l as i32);
                        for t in [tstar - off, tstar + off] {
                            if inside(t) {
                                fam_entries.push(b.entry(fi, t, b.family_label(fi, t), Some(l), None)?);
                            }
                        }
                    }
                }
                let mut approach = |end: f64, dir: f64| -> Result<(), ModelError> {
                    let mut prev = f64::NAN;
                    for k in 1..=opts.max_depth {
                        let t = end + dir * h * 0.5f64.powi(k as i32);
                        if t == end || t == prev {
                            break;
                        }
                        prev = t;
                        fam_entries.push(b.entry(fi, t, b.family_label(fi, t), None, Some(k))?);
                    }
                    if opts.closure {
                        if let Ok(e) = b.entry(fi, end, b.limit_label(fi, end), None, Some(CLOSURE_DEPTH)) {
                            if e.value.is_finite() {
                                fam_entries.push(e);
                            }
                        }
                    }
                    Ok(())
                };
                if !include_lower {
                    approach(a, 1.0)?;
                }
                if !include_upper {
                    approach(bnd, -1.0)?;
                }
            }
            IndexSetDescriptor::Countable { start, truncation, .. } => {
                let nmax = opts.truncation.unwrap_or(*truncation).max(*start);
                for nn in *start..=nmax {
                    let t = nn as f64;
                    fam_entries.push(b.entry(fi, t, b.family_label(fi, t), Some(0), None)?);
                }
                for k in 1..=opts.max_depth {
                    let t = nmax as f64 * 2f64.powi(k as i32);
                    fam_entries.push(b.entry(fi, t, b.family_label(fi, t), None, Some(k))?);
                }
                if opts.closure {
                    // stand-in for n = ∞ that keeps intermediate products finite
                    if let Ok(e) = b.entry(fi, COUNTABLE_LIMIT, b.limit_label(fi, f64::INFINITY), None, Some(CLOSURE_DEPTH)) {
                        fam_entries.push(e);
                    }
                }
            }
        }
        if fam.set.is_finite() {
            entries.extend(fam_entries);
            continue;
        }
        // merge duplicate index values
        fam_entries.sort_by(|p, q| p.t.unwrap().total_cmp(&q.t.unwrap()).then(p.is_limit().cmp(&q.is_limit())));
        let mut merged: Vec<IndexEntry> = Vec::with_capacity(fam_entries.len());
        for e in fam_entries {
            match merged.last_mut() {
                Some(last) if last.t == e.t && !last.is_limit() && !e.is_limit() => {
                    last.level = min_opt(last.level, e.level);
                    last.depth = min_opt(last.depth, e.depth);
                }
                _ => merged.push(e),
            }
        }
        if merged.iter().all(|e| e.is_limit()) {
            return Err(ModelError::EmptyMaterialization(fam.name.clone()));
        }
        entries.extend(merged);
    }
    Ok(Materialization {
        point: x.to_vec(),
        entries,
        levels: levels.unwrap_or(DEFAULT_LEVELS as u32),
    })
}

fn min_opt(a: Option<u32>, b: Option<u32>) -> Option<u32> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Label of a fixed constraint or of a family member at `t`, as produced by
/// [`materialize`] for non-limit entries.
pub fn index_label(inst: &SipInstance, source: Source, t: Option<f64>) -> String {
    match source {
        Source::Fixed(i) => inst.fixed[i].name.clone(),
        Source::Family(f) => Builder { inst, x: &[] }.family_label(f, t.unwrap_or(f64::NAN)),
    }
}

/// `(g_t(x), ∇g_t(x))` for one index; `t` is ignored for fixed constraints.
pub fn evaluate_index(inst: &SipInstance, source: Source, t: Option<f64>, x: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
    match (source, t) {
        (Source::Fixed(i), _) => {
            let c = inst
                .fixed
                .get(i)
                .ok_or_else(|| ModelError::Validation(format!("no fixed constraint {i}")))?;
            value_grad(&c.body, &Bindings::new(x)).map_err(|source| ModelError::Eval {
                label: c.name.clone(),
                source,
            })
        }
        (Source::Family(f), Some(t)) if f < inst.families.len() => Builder { inst, x }.eval_family(f, t),
        _ => Err(ModelError::Validation("family index needs a parameter value".into())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// `sup_t g_t(x)` over the closure of the materialized index set; `-inf`
    /// without inequalities.
    pub max_violation: f64,
    pub worst: Option<String>,
    pub equality_residual: f64,
    pub feasible: bool,
}

pub fn feasibility_check(inst: &SipInstance, x: &[f64], tol: f64) -> Result<Feasibility, ModelError> {
    let mat = materialize(inst, x, &MaterializeOptions::default())?;
    feasibility_in(inst, &mat, tol)
}

pub(crate) fn feasibility_in(inst: &SipInstance, mat: &Materialization, tol: f64) -> Result<Feasibility, ModelError> {
    let worst = mat.max_value(Resolution::CLOSURE);
    let max_violation = worst.map_or(f64::NEG_INFINITY, |e| e.value);
    let equality_residual = inst.equality_residual(&mat.point)?;
    Ok(Feasibility {
        max_violation,
        worst: worst.map(|e| e.label.clone()),
        equality_residual,
        feasible: max_violation <= tol && equality_residual <= tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveSetReport {
    pub point: Vec<f64>,
    pub eps: f64,
    pub resolution: Resolution,
    /// `g_t(x) >= -ACTIVE_TOL`
    pub active: Vec<IndexEntry>,
    /// `g_t(x) >= -(eps + ACTIVE_TOL)`
    pub eps_active: Vec<IndexEntry>,
    /// `g_t(x) >= -(eps * |grad g_t(x)| + ACTIVE_TOL)`; empty unless requested.
    pub normalized: Vec<IndexEntry>,
    pub max_grad_norm: f64,
    pub min_grad_norm: f64,
}

pub fn active_set(inst: &SipInstance, x: &[f64], eps: f64, normalized: bool) -> Result<ActiveSetReport, ModelError> {
    let mat = materialize(inst, x, &MaterializeOptions::default())?;
    Ok(active_set_in(&mat, eps, mat.analysis_resolution(), normalized))
}

pub fn active_set_in(mat: &Materialization, eps: f64, res: Resolution, normalized: bool) -> ActiveSetReport {
    let mut r = ActiveSetReport {
        point: mat.point.clone(),
        eps,
        resolution: res,
        active: vec![],
        eps_active: vec![],
        normalized: vec![],
        max_grad_norm: 0.0,
        min_grad_norm: f64::INFINITY,
    };
    for e in mat.select(res).filter(|e| !e.is_limit()) {
        let nrm = e.grad_norm();
        r.max_grad_norm = r.max_grad_norm.max(nrm);
        r.min_grad_norm = r.min_grad_norm.min(nrm);
        if e.value >= -ACTIVE_TOL {
            r.active.push(e.clone());
        }
        if e.value >= -(eps + ACTIVE_TOL) {
            r.eps_active.push(e.clone());
        }
        if normalized && e.value >= -(eps * nrm + ACTIVE_TOL) {
            r.normalized.push(e.clone());
        }
    }
    r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientBound {
    pub bound: f64,
    pub min_norm: f64,
    pub pass: bool,
    /// Norms spread by a factor of at least 1e3; the normalized active set
    /// is the better-conditioned choice.
    pub normalize: bool,
}

pub fn gradient_bound_check(report: &ActiveSetReport) -> GradientBound {
    let (bound, min_norm) = (report.max_grad_norm, report.min_grad_norm);
    GradientBound {
        bound,
        min_norm,
        pass: bound.is_finite(),
        normalize: bound > 0.0 && bound >= 1e3 * min_norm,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    /// Distance to the limit: `1/n` for countable sets, `|t - end|` otherwise.
    pub h: f64,
    pub t: f64,
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Gradients along a sequence approaching a limit that is not an index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyTail {
    pub family: usize,
    pub label: String,
    pub hints: Vec<Vec<f64>>,
    /// Ordered toward the limit (`h` decreasing).
    pub points: Vec<TailPoint>,
}

/// Geometric tail sequences for every family with a missing limit point.
pub fn family_tails(inst: &SipInstance, x: &[f64], count: usize, truncation: Option<u64>) -> Result<Vec<FamilyTail>, ModelError> {
    inst.check_point(x)?;
    let b = Builder { inst, x };
    let mut out = Vec::new();
    for (fi, fam) in inst.families.iter().enumerate() {
        let mut push = |label: String, hints: Vec<Vec<f64>>, seq: Vec<(f64, f64)>| -> Result<(), ModelError> {
            let mut points = Vec::new();
            for (h, t) in seq {
                let (value, grad) = b.eval_family(fi, t)?;
                points.push(TailPoint { h, t, value, grad });
            }
            out.push(FamilyTail {
                family: fi,
                label,
                hints,
                points,
            });
            Ok(())
        };
        match &fam.set {
            IndexSetDescriptor::Finite { .. } => {}
            IndexSetDescriptor::Interval {
                lower,
                upper,
                include_lower,
                include_upper,
                resolution,
                ..
            } => {
                let h = grid_step(*lower, *upper, *resolution);
                let seq = |end: f64, dir: f64| -> Vec<(f64, f64)> {
                    (0..count)
                        .map(|k| h * 0.5f64.powi(k as i32))
                        .map(|s| (s, end + dir * s))
                        .filter(|(_, t)| *t != end)
                        .collect()
                };
                if !include_lower {
                    push(b.limit_label(fi, *lower), vec![], seq(*lower, 1.0))?;
                }
                if !include_upper {
                    push(b.limit_label(fi, *upper), vec![], seq(*upper, -1.0))?;
                }
            }
            IndexSetDescriptor::Countable {
                start,
                truncation: own,
                limit_rays,
            } => {
                let nmax = truncation.unwrap_or(*own).max(*start) as f64;
                let seq = (0..count)
                    .map(|k| nmax * 2f64.powi(k as i32))
                    .map(|n| (1.0 / n, n))
                    .collect();
                push(b.limit_label(fi, f64::INFINITY), limit_rays.clone(), seq)?;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_instance;

    fn ex37() -> SipInstance {
        parse_instance(
            "[problem]\nvars = x1 x2\nminimize = (x1+1)^2 + x2\n[index n]\nkind = countable\nstart = 2\ntruncation = 10000\n[constraints]\ng1 = x1 + 1\ng(n) = x1^3/(3*n) - x2\n",
        )
        .unwrap()
    }

    fn ex35() -> SipInstance {
        parse_instance(
            "[problem]\nvars = x1 x2\n[index t]\nkind = interval\nlower = 0\nupper = 1\ninclude_lower = false\n[constraints]\ng0 = x1 + 1\ng(t) = t*x1 - x2^3\n",
        )
        .unwrap()
    }

    #[test]
    fn feasibility_examples() {
        let f = feasibility_check(&ex37(), &[-1.0, 0.0], 1e-9).unwrap();
        assert!(f.feasible);
        let f = feasibility_check(&ex37(), &[0.0, 0.0], 1e-9).unwrap();
        assert!(!f.feasible);
        assert_eq!(f.max_violation, 1.0);
        assert_eq!(f.worst.as_deref(), Some("g1"));
        assert!(feasibility_check(&ex35(), &[-1.0, 0.0], 1e-9).unwrap().feasible);
    }

    #[test]
    fn countable_eps_active() {
        let r = active_set(&ex37(), &[-1.0, 0.0], 0.05, false).unwrap();
        assert_eq!(r.active.len(), 1);
        assert_eq!(r.active[0].label, "g1");
        // brute-force scan of g_n(x) = -1/(3n) >= -0.05 over the base range
        let expected: Vec<u64> = (2..=10_000u64).filter(|n| -1.0 / (3.0 * *n as f64) >= -0.05).collect();
        let got: Vec<u64> = r
            .eps_active
            .iter()
            .filter(|e| e.level == Some(0) && e.t.is_some())
            .map(|e| e.t.unwrap() as u64)
            .collect();
        assert_eq!(got, expected);
        assert_eq!(got[0], 7);
    }

    #[test]
    fn interval_eps_active() {
        let r = active_set(&ex35(), &[-1.0, 0.0], 0.5, false).unwrap();
        assert_eq!(r.active.len(), 1);
        assert_eq!(r.active[0].label, "g0");
        for e in &r.eps_active[1..] {
            let t = e.t.unwrap();
            assert!(t > 0.0 && t <= 0.5);
        }
        assert!(r.eps_active.iter().any(|e| e.t == Some(0.5)));
        let zero = active_set(&ex35(), &[-1.0, 0.0], 0.0, false).unwrap();
        assert_eq!(zero.active, zero.eps_active);
    }

    #[test]
    fn limit_entries_close_the_index_set() {
        let m = materialize(&ex35(), &[-1.0, 0.0], &MaterializeOptions::default()).unwrap();
        let lim: Vec<_> = m.entries.iter().filter(|e| e.is_limit()).collect();
        assert_eq!(lim.len(), 1);
        assert_eq!(lim[0].t, Some(0.0));
        assert!(!m.select(m.analysis_resolution()).any(|e| e.is_limit()));
        let m = materialize(&ex37(), &[-1.0, 0.0], &MaterializeOptions::default()).unwrap();
        let lim = m.entries.iter().find(|e| e.is_limit()).unwrap();
        assert!(lim.value.abs() < 1e-149);
    }

    #[test]
    fn gradient_bounds() {
        let r = active_set(&ex37(), &[-1.0, 0.0], 0.1, false).unwrap();
        let g = gradient_bound_check(&r);
        assert!((g.bound - 1.25f64.sqrt()).abs() < 1e-12);
        assert!(g.pass);
        let single = parse_instance("[problem]\nvars = x1 x2\n[constraints]\ng = x1\n").unwrap();
        let r = active_set(&single, &[0.0, 0.0], 0.1, false).unwrap();
        assert_eq!(gradient_bound_check(&r).bound, 1.0);
        let fam = parse_instance(
            "[problem]\nvars = x1 x2\n[index t]\nkind = interval\nlower = 0\nupper = 1\n[constraints]\ng(t) = t*x1 - x2\n",
        )
        .unwrap();
        let r = active_set(&fam, &[0.0, 0.0], 0.1, false).unwrap();
        assert!((gradient_bound_check(&r).bound - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn tails() {
        let t = family_tails(&ex37(), &[-1.0, 0.0], 8, None).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].points.len(), 8);
        assert_eq!(t[0].points[0].t, 10_000.0);
        let t = family_tails(&ex35(), &[-1.0, 0.0], 8, None).unwrap();
        assert_eq!(t[0].points[7].t, 1.0 / 256.0 / 128.0);
    }
}
