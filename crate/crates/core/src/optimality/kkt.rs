//! Stationarity systems solved as cone-membership LPs.

use serde::{Deserialize, Serialize};

use super::{equality_rows, normal_cone, NormalConeOptions, OptimalityError, Variant};
use crate::cones::{caratheodory_reduce, membership, GeneratedCone, LabeledVector};
use crate::cq::{cq_summary, require_feasible, CqOptions, Verdict};
use crate::linsolve::{dot, norm_inf, ConeAnswer, LinsolveError, SEPARATOR_TOL};
use crate::model::{materialize, Cost, MaterializeOptions, SipInstance, ACTIVE_TOL};

pub const DEFAULT_KKT_TOL: f64 = 1e-8;
/// Cost pieces within this of the maximum count as active.
const PIECE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    UnperturbedKkt,
    PerturbedStationarity,
    ConvexGlobal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    CertificateFound,
    Refuted,
    Inconclusive,
}

/// `Σ μ_i ∇f_i + Σ λ_t ∇g_t + Σ y_j ∇h_j ≈ 0` with `λ > 0`, `μ` in the simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    pub support: Vec<String>,
    pub lambda: Vec<f64>,
    /// One multiplier per declared equality.
    pub y: Vec<f64>,
    pub residual: f64,
    /// Weights over cost pieces; `[1.0]` for a smooth cost.
    pub weights: Vec<f64>,
}

/// A direction `s` with `<s, ∇f_i> > 0` for every active cost piece,
/// `<s, ∇g> >= 0` for every generator and `<s, ∇h_j> = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaritySeparator {
    pub direction: Vec<f64>,
    /// `min_i <s, ∇f_i>`
    pub cost_slope: f64,
    /// `min <s, ∇g>` over generators and rays, `+inf` without any.
    pub min_constraint: f64,
    pub max_lineality: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsStationarity {
    pub eps: f64,
    pub generators: usize,
    pub rays: usize,
    pub outcome: Outcome,
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub condition: Condition,
    pub outcome: Outcome,
    pub reason: String,
    pub certificate: Option<KktCertificate>,
    pub separator: Option<StationaritySeparator>,
    pub eps_trace: Vec<EpsStationarity>,
    /// Set by the convex check once a verdict about global optimality exists.
    pub global: Option<bool>,
    pub notes: Vec<String>,
}

impl StationarityReport {
    fn new(condition: Condition, found: Found) -> Self {
        let (outcome, reason, certificate, separator) = match found {
            Found::Certificate(c) => (Outcome::CertificateFound, "certificate-verified", Some(c), None),
            Found::Separator(s) => (Outcome::Refuted, "separator-verified", None, Some(s)),
            Found::Nothing(r) => (Outcome::Inconclusive, r, None, None),
        };
        StationarityReport {
            condition,
            outcome,
            reason: reason.into(),
            certificate,
            separator,
            eps_trace: vec![],
            global: None,
            notes: vec![],
        }
    }
}

enum Found {
    Certificate(KktCertificate),
    Separator(StationaritySeparator),
    Nothing(&'static str),
}

struct CostData {
    /// Gradients of the active pieces.
    grads: Vec<Vec<f64>>,
    piece_index: Vec<usize>,
    smooth: bool,
}

fn cost_data(inst: &SipInstance, x: &[f64]) -> Result<CostData, OptimalityError> {
    let pieces = inst.cost_pieces(x)?;
    let top = pieces.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let piece_index: Vec<usize> = (0..pieces.len()).filter(|&i| pieces[i].0 >= top - PIECE_TOL).collect();
    Ok(CostData {
        grads: piece_index.iter().map(|&i| pieces[i].1.clone()).collect(),
        piece_index,
        smooth: matches!(inst.cost, Cost::Smooth(_)),
    })
}

/// Columns of `cone` including rays, with labels.
fn columns(cone: &GeneratedCone) -> Vec<LabeledVector> {
    let mut cols = cone.generators.clone();
    cols.extend(cone.rays.iter().map(|r| LabeledVector::new(r.label.clone(), r.direction.clone())));
    cols
}

fn extend(v: &[f64], last: f64) -> Vec<f64> {
    let mut w = v.to_vec();
    w.push(last);
    w
}

/// Maps multipliers on the cone's lineality basis back to the declared
/// equality gradients; dropped dependent rows get zero.
fn spread_y(basis: &[Vec<f64>], rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rows.len()];
    let mut used = vec![false; rows.len()];
    for (k, b) in basis.iter().enumerate() {
        if let Some(j) = (0..rows.len()).find(|&j| !used[j] && rows[j] == *b) {
            used[j] = true;
            out[j] = y.get(k).copied().unwrap_or(0.0);
        }
    }
    out
}

/// Decides `0 ∈ co{∇f_i} + cone + span(∇h)` for the columns of `cone`.
fn stationarity_in(cost: &CostData, cone: &GeneratedCone, eq_rows: &[Vec<f64>], tol: f64) -> Result<(Found, Option<f64>), OptimalityError> {
    let n = cone.dim;
    let cols = columns(cone);
    let p = cost.grads.len();
    // Smooth costs use the direct system; max costs an augmented one whose
    // last coordinate forces the piece weights to sum to one.
    let (lp_cone, target) = if cost.smooth {
        let plain = GeneratedCone::new(n, cols.clone(), cone.lineality.clone())?;
        (plain, cost.grads[0].iter().map(|g| -g).collect::<Vec<f64>>())
    } else {
        let mut gens: Vec<LabeledVector> = cost
            .piece_index
            .iter()
            .zip(&cost.grads)
            .map(|(i, g)| LabeledVector::new(format!("cost[{i}]"), extend(g, 1.0)))
            .collect();
        gens.extend(cols.iter().map(|c| LabeledVector::new(c.label.clone(), extend(&c.vector, 0.0))));
        let lin = cone.lineality.iter().map(|h| extend(h, 0.0)).collect();
        let mut e = vec![0.0; n + 1];
        e[n] = 1.0;
        (GeneratedCone::new(n + 1, gens, lin)?, e)
    };
    let offset = if cost.smooth { 0 } else { p };
    let answer = match membership(&lp_cone, &target, tol, false) {
        Ok(a) => a,
        Err(LinsolveError::Unverified { residual }) => return Ok((Found::Nothing("lp-unverified"), Some(residual))),
        Err(e) => return Err(e.into()),
    };
    match answer {
        ConeAnswer::Member(cert) => {
            let cert = caratheodory_reduce(&cert, &lp_cone, &target);
            let weights: Vec<f64> = if cost.smooth { vec![1.0] } else { cert.lambda[..p].to_vec() };
            let mut full_weights = vec![0.0; cost.piece_index.iter().max().map_or(0, |m| m + 1)];
            for (k, &i) in cost.piece_index.iter().enumerate() {
                full_weights[i] = weights[k];
            }
            let y = spread_y(&lp_cone.lineality.iter().map(|h| h[..n].to_vec()).collect::<Vec<_>>(), eq_rows, &cert.y);
            // re-verify against the raw gradients
            let mut r = vec![0.0; n];
            for (w, g) in weights.iter().zip(&cost.grads) {
                r.iter_mut().zip(g).for_each(|(ri, gi)| *ri += w * gi);
            }
            let mut support = Vec::new();
            let mut lambda = Vec::new();
            for (j, c) in cols.iter().enumerate() {
                let l = cert.lambda[offset + j];
                if l > 0.0 {
                    r.iter_mut().zip(&c.vector).for_each(|(ri, ci)| *ri += l * ci);
                    support.push(c.label.clone());
                    lambda.push(l);
                }
            }
            for (yj, h) in y.iter().zip(eq_rows) {
                r.iter_mut().zip(h).for_each(|(ri, hi)| *ri += yj * hi);
            }
            let weight_gap = if cost.smooth { 0.0 } else { (weights.iter().sum::<f64>() - 1.0).abs() };
            let residual = norm_inf(&r).max(weight_gap);
            if residual > tol || weights.iter().any(|w| *w < 0.0) {
                return Ok((Found::Nothing("certificate-failed-recheck"), Some(residual)));
            }
            Ok((
                Found::Certificate(KktCertificate {
                    support,
                    lambda,
                    y,
                    residual,
                    weights: full_weights,
                }),
                Some(residual),
            ))
        }
        ConeAnswer::Separated(sep) => {
            let s: Vec<f64> = sep.functional[..n].iter().map(|v| -v).collect();
            let cost_slope = cost.grads.iter().map(|g| dot(&s, g)).fold(f64::INFINITY, f64::min);
            let min_constraint = cols.iter().map(|c| dot(&s, &c.vector)).fold(f64::INFINITY, f64::min);
            let max_lineality = eq_rows.iter().map(|h| dot(&s, h).abs()).fold(0.0, f64::max);
            let ok = cost_slope > 0.0 && min_constraint >= -SEPARATOR_TOL && max_lineality <= SEPARATOR_TOL;
            if !ok {
                return Ok((Found::Nothing("separator-failed-recheck"), Some(sep.residual)));
            }
            Ok((
                Found::Separator(StationaritySeparator {
                    direction: s,
                    cost_slope,
                    min_constraint,
                    max_lineality,
                }),
                Some(sep.residual),
            ))
        }
    }
}

fn active_cone(inst: &SipInstance, x: &[f64]) -> Result<GeneratedCone, OptimalityError> {
    let mat = materialize(inst, x, &MaterializeOptions::default())?;
    require_feasible(inst, &mat)?;
    let res = mat.analysis_resolution();
    let gens = mat
        .select(res)
        .filter(|e| !e.is_limit() && e.value >= -ACTIVE_TOL)
        .map(|e| LabeledVector::new(e.label.clone(), e.grad.clone()))
        .collect();
    Ok(GeneratedCone::new(inst.n(), gens, equality_rows(inst, x)?)?)
}

/// Multipliers on the active constraints annihilating the cost gradient (or
/// a convex combination of active piece gradients), or a separator showing
/// none exist over the materialized active set.
pub fn verify_kkt(inst: &SipInstance, x: &[f64], tol: f64) -> Result<StationarityReport, OptimalityError> {
    let cone = active_cone(inst, x)?;
    let cost = cost_data(inst, x)?;
    let (found, _) = stationarity_in(&cost, &cone, &equality_rows(inst, x)?, tol)?;
    let mut r = StationarityReport::new(Condition::UnperturbedKkt, found);
    r.notes.push(format!("{} active generators", cone.generators.len()));
    Ok(r)
}

/// Stationarity against the perturbed cone at every scheduled ε, rays
/// included. A certificate at every ε is the finite stand-in for the
/// intersection over ε > 0.
pub fn verify_perturbed_stationarity(
    inst: &SipInstance,
    x: &[f64],
    opts: &NormalConeOptions,
    tol: f64,
) -> Result<StationarityReport, OptimalityError> {
    let rep = normal_cone(inst, x, Variant::Perturbed, opts)?;
    let cost = cost_data(inst, x)?;
    let eq = equality_rows(inst, x)?;
    let mut trace = Vec::new();
    let mut last_cert = None;
    let mut first_sep = None;
    let mut all_found = true;
    for c in &rep.cones {
        let (found, residual) = stationarity_in(&cost, &c.cone, &eq, tol)?;
        let outcome = match found {
            Found::Certificate(cert) => {
                last_cert = Some(cert);
                Outcome::CertificateFound
            }
            Found::Separator(s) => {
                all_found = false;
                first_sep.get_or_insert(s);
                Outcome::Refuted
            }
            Found::Nothing(_) => {
                all_found = false;
                Outcome::Inconclusive
            }
        };
        trace.push(EpsStationarity {
            eps: c.eps,
            generators: c.cone.generators.len(),
            rays: c.cone.rays.len(),
            outcome,
            residual,
        });
    }
    let found = if all_found {
        Found::Certificate(last_cert.expect("non-empty schedule"))
    } else if let Some(s) = first_sep {
        Found::Separator(s)
    } else {
        Found::Nothing("inconclusive-at-some-eps")
    };
    let mut r = StationarityReport::new(Condition::PerturbedStationarity, found);
    r.eps_trace = trace;
    if !rep.valid {
        r.notes.push("PMFCQ not established; the condition is not guaranteed to be necessary here".into());
    }
    r.notes.extend(rep.warnings);
    Ok(r)
}

/// KKT check for declared-convex instances, where a certificate proves
/// global optimality. A separator disproves it only once the qualification
/// premises are established.
pub fn convex_global_check(inst: &SipInstance, x: &[f64], tol: f64) -> Result<StationarityReport, OptimalityError> {
    if !inst.convex || !inst.equalities.affine {
        let mut r = StationarityReport::new(Condition::ConvexGlobal, Found::Nothing("nonconvex"));
        r.notes.push("global check needs a declared-convex instance with affine equalities".into());
        return Ok(r);
    }
    let mut r = verify_kkt(inst, x, tol)?;
    r.condition = Condition::ConvexGlobal;
    match r.outcome {
        Outcome::CertificateFound => {
            r.global = Some(true);
            r.notes.push("global minimizer".into());
        }
        Outcome::Refuted => {
            let cq = cq_summary(inst, x, &CqOptions::default())?;
            let qualified = (cq.pmfcq.verdict == Verdict::Holds || cq.ssc.verdict == Verdict::Holds) && cq.nfmcq.verdict == Verdict::Holds;
            if qualified {
                r.global = Some(false);
                r.notes.push("not a global minimizer".into());
            } else {
                r.outcome = Outcome::Inconclusive;
                r.reason = "qualification-premises-missing".into();
                r.notes.push(format!(
                    "separator found but PMFCQ {:?}, SSC {:?}, NFMCQ {:?}",
                    cq.pmfcq.verdict, cq.ssc.verdict, cq.nfmcq.verdict
                ));
            }
        }
        Outcome::Inconclusive => {}
    }
    Ok(r)
}
