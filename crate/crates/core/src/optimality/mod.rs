//! Normal cones to the feasible set and stationarity certificates.

mod kkt;
mod probe;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cones::{closedness_diagnostic, family_rays, ClosednessVerdict, GeneratedCone, LabeledVector, RayEstimate};
use crate::cq::{check_nfmcq, check_pmfcq_in, check_ssc, default_eps_schedule, require_feasible, CqError, SscOptions, Verdict, DEFAULT_MARGIN_TOL};
use crate::linsolve::LinsolveError;
use crate::model::{
    estimate_moduli, materialize, IndexEntry, IndexSetDescriptor, MaterializeOptions, Materialization, ModelError, Resolution,
    SipInstance, UniformityModuli, ACTIVE_TOL,
};

pub use kkt::{
    convex_global_check, verify_kkt, verify_perturbed_stationarity, Condition, EpsStationarity, KktCertificate, Outcome,
    StationarityReport, StationaritySeparator, DEFAULT_KKT_TOL,
};
pub use probe::{empirical_normal_cone_probe, ProbeRadius, ProbeResult, MIN_FEASIBLE_SAMPLES};

#[derive(Debug, Error)]
pub enum OptimalityError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linsolve(#[from] LinsolveError),
    #[error(transparent)]
    Cq(#[from] CqError),
    #[error("instance is not affine: {0}")]
    NotAffine(String),
}

impl OptimalityError {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, OptimalityError::Cq(CqError::Infeasible { .. }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Gradients over the ε-active sets, closed with limit rays.
    Perturbed,
    /// Gradients of the active constraints only.
    Unperturbed,
    /// ε-activity measured relative to the gradient norm.
    Normalized,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "perturbed" => Ok(Variant::Perturbed),
            "unperturbed" => Ok(Variant::Unperturbed),
            "normalized" => Ok(Variant::Normalized),
            _ => Err(format!("unknown variant `{s}` (perturbed, unperturbed, normalized)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalConeOptions {
    pub eps_schedule: Vec<f64>,
    pub margin_tol: f64,
    /// Point pairs per radius for the differentiability moduli.
    pub moduli_samples: usize,
    pub seed: u64,
}

impl Default for NormalConeOptions {
    fn default() -> Self {
        NormalConeOptions {
            eps_schedule: default_eps_schedule(),
            margin_tol: DEFAULT_MARGIN_TOL,
            moduli_samples: 64,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsCone {
    pub eps: f64,
    pub cone: GeneratedCone,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalConeRep {
    pub point: Vec<f64>,
    pub variant: Variant,
    /// One cone per ε, largest ε first. The unperturbed variant has a single
    /// entry with ε = 0.
    pub cones: Vec<EpsCone>,
    /// Cone at the smallest ε; contained in every other entry.
    pub stabilized: GeneratedCone,
    pub closedness: ClosednessVerdict,
    /// Equal to `stabilized` when the differentiability moduli vanish.
    pub limiting: Option<GeneratedCone>,
    pub regular: bool,
    pub moduli: Option<UniformityModuli>,
    /// Tail estimates whose rays were attached.
    pub tails: Vec<RayEstimate>,
    /// Whether the premises for this variant were established.
    pub valid: bool,
    pub warnings: Vec<String>,
}

const MODULI_ETA: [f64; 3] = [1e-1, 1e-2, 1e-3];

fn equality_rows(inst: &SipInstance, x: &[f64]) -> Result<Vec<Vec<f64>>, ModelError> {
    Ok(inst.equality_jacobian(x)?.into_iter().map(|(_, g)| g).collect())
}

fn selected(variant: Variant, eps: f64, value: f64, grad_norm: f64) -> bool {
    match variant {
        Variant::Perturbed => value >= -(eps + ACTIVE_TOL),
        Variant::Normalized => value >= -(eps * grad_norm + ACTIVE_TOL),
        Variant::Unperturbed => value >= -ACTIVE_TOL,
    }
}

/// One resolution for the whole schedule, deep enough that the approach
/// points active at the smallest ε are present. Sharing it keeps the cones
/// nested.
fn common_resolution(mat: &Materialization, variant: Variant, schedule: &[f64]) -> Resolution {
    let levels = mat.analysis_resolution().level;
    let depth = schedule
        .iter()
        .filter_map(|&eps| {
            mat.entries
                .iter()
                .filter(|e| e.level.is_none() && !e.is_limit() && selected(variant, eps, e.value, e.grad_norm()))
                .filter_map(|e| e.depth)
                .min()
        })
        .max()
        .unwrap_or(0);
    Resolution::new(levels, depth.saturating_add(levels))
}

fn generators<'a>(entries: impl Iterator<Item = &'a IndexEntry>) -> Vec<LabeledVector> {
    entries.map(|e| LabeledVector::new(e.label.clone(), e.grad.clone())).collect()
}

fn compact_index_set(inst: &SipInstance) -> bool {
    inst.families.iter().all(|f| match &f.set {
        IndexSetDescriptor::Finite { .. } => true,
        IndexSetDescriptor::Interval {
            include_lower,
            include_upper,
            ..
        } => *include_lower && *include_upper,
        IndexSetDescriptor::Countable { .. } => false,
    })
}

/// Finite representation of the normal cone to the feasible set at `x`.
///
/// The intersection over ε > 0 is approximated by the smallest scheduled ε,
/// so a member of `stabilized` is a member at every scheduled ε but nothing
/// is claimed below the schedule. Missing premises produce warnings and
/// `valid = false`, not errors.
pub fn normal_cone(inst: &SipInstance, x: &[f64], variant: Variant, opts: &NormalConeOptions) -> Result<NormalConeRep, OptimalityError> {
    let mat = materialize(inst, x, &MaterializeOptions::default())?;
    require_feasible(inst, &mat)?;
    let n = inst.n();
    let lineality = equality_rows(inst, x)?;
    let mut warnings = Vec::new();
    let mut schedule: Vec<f64> = opts.eps_schedule.iter().copied().filter(|e| *e > 0.0).collect();
    schedule.sort_by(|a, b| b.total_cmp(a));
    schedule.dedup();

    let pmfcq = check_pmfcq_in(inst, &mat, &schedule, opts.margin_tol)?;
    let mut cones = Vec::new();
    let mut tails_used = Vec::new();
    let valid;
    match variant {
        Variant::Unperturbed => {
            let res = mat.analysis_resolution();
            let gens = generators(mat.select(res).filter(|e| !e.is_limit() && e.value >= -ACTIVE_TOL));
            cones.push(EpsCone {
                eps: 0.0,
                cone: GeneratedCone::new(n, gens, lineality.clone())?,
            });
            let nfmcq = check_nfmcq(inst, x)?.verdict;
            let compact = compact_index_set(inst);
            valid = pmfcq.verdict == Verdict::Holds && (nfmcq == Verdict::Holds || compact);
            if !valid {
                warnings.push(format!(
                    "unperturbed representation not guaranteed: PMFCQ {:?}, NFMCQ {:?}, compact index set {compact}",
                    pmfcq.verdict, nfmcq
                ));
            }
        }
        Variant::Perturbed | Variant::Normalized => {
            if schedule.is_empty() {
                return Err(OptimalityError::Model(ModelError::Validation("empty ε schedule".into())));
            }
            let res = common_resolution(&mat, variant, &schedule);
            let tails = family_rays(inst, x, false)?;
            for &eps in &schedule {
                let gens = generators(mat.select(res).filter(|e| !e.is_limit() && selected(variant, eps, e.value, e.grad_norm())));
                let live: Vec<RayEstimate> = tails
                    .iter()
                    .filter(|(t, _)| {
                        t.points.last().is_some_and(|p| {
                            let norm = crate::linsolve::norm2(&p.grad);
                            selected(variant, eps, p.value, norm)
                        })
                    })
                    .map(|(_, r)| r.clone())
                    .collect();
                let cone = GeneratedCone::new(n, gens, lineality.clone())?.attach_rays(&live)?;
                cones.push(EpsCone { eps, cone });
                if eps == *schedule.last().unwrap_or(&eps) {
                    tails_used = live;
                }
            }
            for t in &tails_used {
                warnings.extend(t.warnings.iter().cloned());
                if t.inconclusive {
                    warnings.push(format!("{}: limit directions unresolved; closure may be incomplete", t.label));
                }
            }
            valid = pmfcq.verdict == Verdict::Holds;
            if !valid {
                warnings.push(format!("PMFCQ {:?}: representation not guaranteed to equal the normal cone", pmfcq.verdict));
            }
        }
    }

    let mut stabilized = cones.last().map(|c| c.cone.clone()).expect("at least one cone");
    let closedness = closedness_diagnostic(&stabilized.generators, &tails_used)?;
    stabilized.closedness = closedness.status;

    let moduli = estimate_moduli(inst, x, &MODULI_ETA, opts.moduli_samples, opts.seed)?;
    let regular = moduli.vanishing();
    if !regular {
        warnings.push("differentiability moduli do not vanish; limiting cone not represented".into());
    }
    Ok(NormalConeRep {
        point: x.to_vec(),
        variant,
        cones,
        limiting: regular.then(|| stabilized.clone()),
        stabilized,
        closedness,
        regular,
        moduli: Some(moduli),
        tails: tails_used,
        valid,
        warnings,
    })
}

/// Normal cone for a system of affine constraints.
///
/// With `h` absent and a closed cone of augmented coefficients, the cone of
/// active coefficients; otherwise the perturbed form, valid when a Slater
/// point is found.
pub fn linear_specialization(inst: &SipInstance, x: &[f64], opts: &NormalConeOptions) -> Result<NormalConeRep, OptimalityError> {
    if !inst.is_affine() {
        return Err(OptimalityError::NotAffine("every inequality and equality must be affine in x".into()));
    }
    let nfmcq = check_nfmcq(inst, x)?;
    if !inst.has_equalities() && nfmcq.verdict == Verdict::Holds {
        let mut rep = normal_cone(inst, x, Variant::Unperturbed, opts)?;
        rep.valid = true;
        rep.warnings.retain(|w| !w.starts_with("unperturbed representation not guaranteed"));
        return Ok(rep);
    }
    // affine constraints are convex whatever the instance declares
    let mut convex = inst.clone();
    convex.convex = true;
    let ssc = check_ssc(&convex, None, &[x.to_vec()], None, &SscOptions { seed: opts.seed, ..Default::default() })?;
    let mut rep = normal_cone(inst, x, Variant::Perturbed, opts)?;
    if ssc.verdict == Verdict::Holds {
        rep.valid = true;
        rep.warnings.retain(|w| !w.starts_with("PMFCQ"));
    } else {
        rep.valid = false;
        rep.warnings.push(format!("no Slater point found ({}); perturbed form not guaranteed", ssc.reason));
    }
    Ok(rep)
}
