//! Constraint qualifications at a feasible point.

mod mfcq;
mod ssc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cones::{augmented_generators, closedness_diagnostic, family_rays, Closedness, ClosednessVerdict, RayEstimate};
use crate::linsolve::{rank_nullspace, LinsolveError, Matrix};
use crate::model::{feasibility_in, materialize, MaterializeOptions, Materialization, ModelError, SipInstance, FEASIBILITY_TOL};

pub use mfcq::{check_emfcq, check_emfcq_in, check_pmfcq, check_pmfcq_in, EmfcqResult, PmfcqEps, PmfcqLevel, PmfcqResult};
pub use ssc::{check_ssc, SscOptions, SscResult, SSC_TOL};

pub const DEFAULT_MARGIN_TOL: f64 = 1e-6;

pub fn default_eps_schedule() -> Vec<f64> {
    (1..=8).map(|k| 10f64.powi(-k)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Holds,
    Fails,
    Unknown,
}

#[derive(Debug, Error)]
pub enum CqError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linsolve(#[from] LinsolveError),
    #[error("point is infeasible: {label} reaches {violation:e}")]
    Infeasible { violation: f64, label: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CqOptions {
    /// Decreasing ε values.
    pub eps_schedule: Vec<f64>,
    pub margin_tol: f64,
    pub ssc: SscOptions,
    pub ssc_candidate: Option<Vec<f64>>,
}

impl Default for CqOptions {
    fn default() -> Self {
        CqOptions {
            eps_schedule: default_eps_schedule(),
            margin_tol: DEFAULT_MARGIN_TOL,
            ssc: SscOptions::default(),
            ssc_candidate: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Surjectivity {
    pub rank: usize,
    pub m: usize,
}

impl Surjectivity {
    pub fn holds(&self) -> bool {
        self.rank == self.m
    }
}

/// Rank of the equality Jacobian at `x`, plus its rows.
pub(crate) fn surjectivity(inst: &SipInstance, x: &[f64]) -> Result<(Surjectivity, Vec<Vec<f64>>), ModelError> {
    let rows: Vec<Vec<f64>> = inst.equality_jacobian(x)?.into_iter().map(|(_, g)| g).collect();
    let rank = if rows.is_empty() {
        0
    } else {
        rank_nullspace(&Matrix::from_rows(&rows, inst.n()), 1e-10).0
    };
    Ok((Surjectivity { rank, m: rows.len() }, rows))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NfmcqResult {
    pub verdict: Verdict,
    /// `full`, or `inequality-part` when equalities are present.
    pub scope: String,
    pub closedness: ClosednessVerdict,
    pub rays: Vec<RayEstimate>,
}

/// Closedness of the cone of augmented gradients over the whole index set.
pub fn check_nfmcq(inst: &SipInstance, x: &[f64]) -> Result<NfmcqResult, CqError> {
    let gens = augmented_generators(inst, x)?;
    let rays: Vec<RayEstimate> = family_rays(inst, x, true)?.into_iter().map(|(_, e)| e).collect();
    let closedness = closedness_diagnostic(&gens, &rays)?;
    let verdict = match closedness.status {
        Closedness::Closed => Verdict::Holds,
        Closedness::NotClosed => Verdict::Fails,
        Closedness::Unknown => Verdict::Unknown,
    };
    Ok(NfmcqResult {
        verdict,
        scope: if inst.has_equalities() { "inequality-part" } else { "full" }.into(),
        closedness,
        rays,
    })
}

/// `Infeasible` unless the materialized point is feasible to `FEASIBILITY_TOL`.
pub(crate) fn require_feasible(inst: &SipInstance, mat: &Materialization) -> Result<(), CqError> {
    let feas = feasibility_in(inst, mat, FEASIBILITY_TOL)?;
    if feas.feasible {
        return Ok(());
    }
    let (violation, label) = if feas.equality_residual > FEASIBILITY_TOL {
        (feas.equality_residual, "equalities".to_string())
    } else {
        (feas.max_violation, feas.worst.unwrap_or_default())
    };
    Err(CqError::Infeasible { violation, label })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CqReport {
    pub point: Vec<f64>,
    pub emfcq: EmfcqResult,
    pub pmfcq: PmfcqResult,
    pub nfmcq: NfmcqResult,
    pub ssc: SscResult,
    /// Implication violations found and how they were resolved.
    pub diagnostics: Vec<String>,
}

/// Every check at `x`, with verdicts made consistent with the known
/// implications between them.
pub fn cq_summary(inst: &SipInstance, x: &[f64], opts: &CqOptions) -> Result<CqReport, CqError> {
    let mat = materialize(inst, x, &MaterializeOptions::default())?;
    require_feasible(inst, &mat)?;
    let mut emfcq = check_emfcq_in(inst, &mat, opts.margin_tol)?;
    let mut pmfcq = check_pmfcq_in(inst, &mat, &opts.eps_schedule, opts.margin_tol)?;
    let mut nfmcq = check_nfmcq(inst, x)?;
    let mut starts = vec![x.to_vec()];
    let dir = pmfcq.witness.clone().or_else(|| pmfcq.trace.last().map(|e| e.direction.clone()));
    let line: Option<(Vec<f64>, Vec<f64>)> = dir.map(|d| (x.to_vec(), d));
    if let Some(c) = &opts.ssc_candidate {
        starts.push(c.clone());
    }
    let mut ssc = check_ssc(inst, opts.ssc_candidate.as_deref(), &starts, line.as_ref(), &opts.ssc)?;

    let mut diagnostics = Vec::new();
    if pmfcq.verdict == Verdict::Holds && emfcq.verdict != Verdict::Holds {
        diagnostics.push(format!("PMFCQ holds but EMFCQ is {:?}; both downgraded", emfcq.verdict));
        pmfcq.verdict = Verdict::Unknown;
        emfcq.verdict = Verdict::Unknown;
    }
    let finite = inst.families.iter().all(|f| f.set.is_finite());
    if finite && emfcq.verdict == Verdict::Holds && nfmcq.verdict == Verdict::Fails {
        diagnostics.push("finite index set with MFCQ but a non-closed cone; NFMCQ downgraded".into());
        nfmcq.verdict = Verdict::Unknown;
    }
    let convex_affine = inst.convex && inst.equalities.affine;
    if convex_affine {
        match (pmfcq.verdict, ssc.verdict) {
            (Verdict::Fails, Verdict::Holds) => {
                diagnostics.push("Slater point found although PMFCQ fails; both downgraded".into());
                pmfcq.verdict = Verdict::Unknown;
                ssc.verdict = Verdict::Unknown;
            }
            (Verdict::Holds, Verdict::Fails) => {
                diagnostics.push("PMFCQ holds although SSC fails; SSC downgraded".into());
                ssc.verdict = Verdict::Unknown;
            }
            (Verdict::Fails, Verdict::Unknown) => {
                ssc.verdict = Verdict::Fails;
                ssc.reason = "pmfcq-fails-on-convex-instance".into();
            }
            _ => {}
        }
    }
    Ok(CqReport {
        point: x.to_vec(),
        emfcq,
        pmfcq,
        nfmcq,
        ssc,
        diagnostics,
    })
}

#[cfg(test)]
mod tests;
