//! Descent-direction qualifications: extended and perturbed MFCQ.

use serde::{Deserialize, Serialize};

use super::{surjectivity, CqError, Surjectivity, Verdict};
use crate::linsolve::{max_margin_direction, Matrix};
use crate::model::{
    active_set_in, materialize, IndexEntry, MaterializeOptions, Materialization, Resolution, SipInstance, ACTIVE_TOL,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmfcqResult {
    pub verdict: Verdict,
    pub reason: String,
    pub surjectivity: Surjectivity,
    /// Labels of the active indices used.
    pub active: Vec<String>,
    pub direction: Vec<f64>,
    pub margin: f64,
}

fn margin_over(entries: &[&IndexEntry], jac: &[Vec<f64>], n: usize) -> Result<(Vec<f64>, f64), CqError> {
    let g = Matrix::from_columns(n, &entries.iter().map(|e| e.grad.clone()).collect::<Vec<_>>());
    let h = Matrix::from_columns(n, jac);
    let r = max_margin_direction(&g, &h)?;
    Ok((r.direction, r.margin))
}

pub fn check_emfcq(inst: &SipInstance, x: &[f64], margin_tol: f64) -> Result<EmfcqResult, CqError> {
    let mat = materialize(inst, x, &MaterializeOptions::default())?;
    check_emfcq_in(inst, &mat, margin_tol)
}

/// Surjective equality Jacobian and a direction in its kernel along which
/// every active constraint decreases at rate at least `margin_tol`.
pub fn check_emfcq_in(inst: &SipInstance, mat: &Materialization, margin_tol: f64) -> Result<EmfcqResult, CqError> {
    let n = inst.n();
    let (surj, jac) = surjectivity(inst, &mat.point)?;
    let report = active_set_in(mat, 0.0, mat.analysis_resolution(), false);
    let active: Vec<&IndexEntry> = report.active.iter().collect();
    let (direction, margin) = margin_over(&active, &jac, n)?;
    let (verdict, reason) = if !surj.holds() {
        (Verdict::Fails, "rank-deficient-equalities")
    } else if active.is_empty() {
        (Verdict::Holds, "no-active-constraints")
    } else if margin > margin_tol {
        (Verdict::Holds, "descent-direction")
    } else {
        (Verdict::Fails, "no-descent-direction")
    };
    Ok(EmfcqResult {
        verdict,
        reason: reason.into(),
        surjectivity: surj,
        active: report.active.iter().map(|e| e.label.clone()).collect(),
        direction,
        margin,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmfcqLevel {
    pub level: u32,
    pub depth: u32,
    pub generators: usize,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmfcqEps {
    pub eps: f64,
    /// Shallowest approach depth whose points are ε-active (0 if none).
    pub approach_depth: u32,
    pub levels: Vec<PmfcqLevel>,
    /// Extrapolated margin under unlimited refinement.
    pub limit_estimate: f64,
    pub stable: bool,
    pub decaying: bool,
    /// Direction at the finest level.
    pub direction: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmfcqResult {
    pub verdict: Verdict,
    pub reason: String,
    pub surjectivity: Surjectivity,
    pub trace: Vec<PmfcqEps>,
    pub stabilized_eps: Option<f64>,
    pub witness: Option<Vec<f64>>,
    pub margin: Option<f64>,
}

/// Aitken extrapolation of the last three margins when they decrease
/// geometrically; otherwise the last margin.
fn limit_estimate(m: &[f64]) -> f64 {
    let Some(&last) = m.last() else { return f64::INFINITY };
    if m.len() < 3 || m.iter().any(|v| !v.is_finite()) {
        return last;
    }
    let (a, b, c) = (m[m.len() - 3], m[m.len() - 2], m[m.len() - 1]);
    let (d1, d2) = (b - a, c - b);
    let dd = d2 - d1;
    let scale = a.abs() + b.abs() + c.abs();
    if d1 >= 0.0 || d2 >= 0.0 || dd.abs() <= 1e-14 * scale || d2 / d1 >= 1.0 {
        return last;
    }
    c - d2 * d2 / dd
}

fn strict_decreases(m: &[f64]) -> usize {
    let mut best = 0;
    let mut run = 0;
    for w in m.windows(2) {
        if w[1].is_finite() && w[1] < 0.99 * w[0] {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best
}

pub fn check_pmfcq(inst: &SipInstance, x: &[f64], eps_schedule: &[f64], margin_tol: f64) -> Result<PmfcqResult, CqError> {
    let mat = materialize(inst, x, &MaterializeOptions::default())?;
    check_pmfcq_in(inst, &mat, eps_schedule, margin_tol)
}

/// Margins over the ε-active gradients for every ε and refinement level.
///
/// Holds when some ε keeps a margin above `margin_tol` at every level that
/// survives extrapolation; fails when at every ε the margins are already
/// below tolerance or decay toward zero over at least three levels.
pub fn check_pmfcq_in(
    inst: &SipInstance,
    mat: &Materialization,
    eps_schedule: &[f64],
    margin_tol: f64,
) -> Result<PmfcqResult, CqError> {
    let n = inst.n();
    let (surj, jac) = surjectivity(inst, &mat.point)?;
    let levels = mat.analysis_resolution().level;
    let mut trace = Vec::new();
    for &eps in eps_schedule {
        let thresh = -(eps + ACTIVE_TOL);
        let approach_depth = mat
            .entries
            .iter()
            .filter(|e| e.level.is_none() && !e.is_limit() && e.value >= thresh)
            .filter_map(|e| e.depth)
            .min()
            .unwrap_or(0);
        let mut rows = Vec::new();
        let mut direction = vec![0.0; n];
        for l in 0..=levels {
            let res = Resolution::new(l, approach_depth.saturating_add(l));
            let set: Vec<&IndexEntry> = mat.select(res).filter(|e| !e.is_limit() && e.value >= thresh).collect();
            let (dir, margin) = margin_over(&set, &jac, n)?;
            direction = dir;
            rows.push(PmfcqLevel {
                level: res.level,
                depth: res.depth,
                generators: set.len(),
                margin,
            });
        }
        let margins: Vec<f64> = rows.iter().map(|r| r.margin).collect();
        let limit = limit_estimate(&margins);
        let last = *margins.last().unwrap_or(&f64::INFINITY);
        let prev = if margins.len() >= 2 { margins[margins.len() - 2] } else { last };
        let settled = !last.is_finite() || (prev - last).abs() <= 0.01 * last.abs();
        let all_positive = margins.iter().all(|m| *m > margin_tol);
        let stable = all_positive && (settled || limit > margin_tol);
        let decaying = last <= margin_tol || (strict_decreases(&margins) >= 3 && limit <= margin_tol);
        trace.push(PmfcqEps {
            eps,
            approach_depth,
            levels: rows,
            limit_estimate: limit,
            stable,
            decaying,
            direction,
        });
    }
    let chosen = trace.iter().find(|e| e.stable);
    let (verdict, reason) = if !surj.holds() {
        (Verdict::Fails, "rank-deficient-equalities")
    } else if chosen.is_some() {
        (Verdict::Holds, "stable-positive-margin")
    } else if !trace.is_empty() && trace.iter().all(|e| e.decaying) {
        (Verdict::Fails, "margin-decays-to-zero")
    } else {
        (Verdict::Unknown, "margin-trend-inconclusive")
    };
    Ok(PmfcqResult {
        verdict,
        reason: reason.into(),
        surjectivity: surj,
        stabilized_eps: chosen.map(|e| e.eps),
        witness: chosen.map(|e| e.direction.clone()),
        margin: chosen.and_then(|e| e.levels.last().map(|l| l.margin)),
        trace,
    })
}
