//! Strong Slater condition: a point where every constraint is strictly negative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CqError, Verdict};
use crate::linsolve::{dot, norm2, norm_inf, orthonormalize};
use crate::model::{feasibility_check, materialize, IndexSample, MaterializeOptions, SipInstance};

/// Required slack: a Slater point has `sup_t g_t <= -SSC_TOL`.
pub const SSC_TOL: f64 = 1e-9;
const EQUALITY_TOL: f64 = 1e-9;
const SAMPLE_PER_FAMILY: usize = 400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SscOptions {
    pub seed: u64,
    pub random_starts: usize,
    pub iterations: usize,
}

impl Default for SscOptions {
    fn default() -> Self {
        SscOptions {
            seed: 0,
            random_starts: 8,
            iterations: 300,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SscResult {
    pub verdict: Verdict,
    pub reason: String,
    pub point: Option<Vec<f64>>,
    /// `sup_t g_t` at `point`, over the closure of the materialized index set.
    pub sup_value: Option<f64>,
    pub sup_label: Option<String>,
    pub equality_residual: Option<f64>,
    pub notes: Vec<String>,
}

impl SscResult {
    fn unknown(reason: &str, notes: Vec<String>) -> Self {
        SscResult {
            verdict: Verdict::Unknown,
            reason: reason.into(),
            point: None,
            sup_value: None,
            sup_label: None,
            equality_residual: None,
            notes,
        }
    }
}

/// Full check of a candidate; `None` when it is not a Slater point.
fn verify(inst: &SipInstance, p: &[f64]) -> Option<SscResult> {
    let f = feasibility_check(inst, p, 0.0).ok()?;
    (f.equality_residual <= EQUALITY_TOL && f.max_violation <= -SSC_TOL).then(|| SscResult {
        verdict: Verdict::Holds,
        reason: String::new(),
        point: Some(p.to_vec()),
        sup_value: Some(f.max_violation),
        sup_label: f.worst,
        equality_residual: Some(f.equality_residual),
        notes: vec![],
    })
}

/// The affine equality set `{x : A x = b}` with its row-space basis.
struct AffineSet {
    rows: Vec<Vec<f64>>,
    basis: Vec<Vec<f64>>,
}

impl AffineSet {
    fn project_direction(&self, d: &mut [f64]) {
        for q in &self.basis {
            let c = dot(d, q);
            for (x, qv) in d.iter_mut().zip(q) {
                *x -= c * qv;
            }
        }
    }

    /// Minimum-norm correction onto the set; the equalities are affine, so
    /// a few Newton steps are exact up to rounding.
    fn project_point(&self, inst: &SipInstance, p: &mut [f64]) -> Option<()> {
        if self.rows.is_empty() {
            return Some(());
        }
        inst.restore_equalities(p, 1e-14).ok().map(|_| ())
    }
}

/// Searches for, or verifies, a point with `h(x̂) = 0` and `sup_t g_t(x̂) < 0`.
///
/// Only meaningful for declared-convex instances with affine equalities;
/// otherwise `Unknown`. A failed search is `Unknown`, never `Fails`.
/// `line` is a base point and direction tried first with halving steps.
pub fn check_ssc(
    inst: &SipInstance,
    candidate: Option<&[f64]>,
    starts: &[Vec<f64>],
    line: Option<&(Vec<f64>, Vec<f64>)>,
    opts: &SscOptions,
) -> Result<SscResult, CqError> {
    if !inst.convex {
        return Ok(SscResult::unknown("nonconvex", vec![]));
    }
    if !inst.equalities.affine {
        return Ok(SscResult::unknown("nonaffine-equalities", vec![]));
    }
    let mut notes = Vec::new();
    if let Some(c) = candidate {
        inst.check_point(c)?;
        if let Some(mut r) = verify(inst, c) {
            r.reason = "candidate-verified".into();
            return Ok(r);
        }
        notes.push("supplied candidate is not a Slater point".into());
    }
    let n = inst.n();
    let Some(origin) = starts.first().cloned().or(line.map(|l| l.0.clone())).or(candidate.map(<[f64]>::to_vec)) else {
        return Ok(SscResult::unknown("no-start-point", notes));
    };
    let origin = origin.as_slice();
    let rows: Vec<Vec<f64>> = inst.equality_jacobian(origin)?.into_iter().map(|(_, g)| g).collect();
    let set = AffineSet {
        basis: orthonormalize(&rows, 1e-10),
        rows,
    };
    let mat = materialize(inst, origin, &MaterializeOptions::default())?;
    let sampled = IndexSample::new(inst, &mat, SAMPLE_PER_FAMILY);
    let mut verifications = 0usize;
    let attempt = |p: &[f64], verifications: &mut usize| -> Option<SscResult> {
        if *verifications >= 64 {
            return None;
        }
        *verifications += 1;
        verify(inst, p)
    };

    if let Some((base, dir)) = line {
        let mut d = dir.clone();
        set.project_direction(&mut d);
        if norm2(&d) > 0.0 {
            for k in 0..=30 {
                let lam = 0.5f64.powi(k);
                let mut p: Vec<f64> = base.iter().zip(&d).map(|(b, v)| b + lam * v).collect();
                if set.project_point(inst, &mut p).is_none() {
                    break;
                }
                if sampled.max_with_grad(&p).0 <= -SSC_TOL {
                    if let Some(mut r) = attempt(&p, &mut verifications) {
                        r.reason = "line-search".into();
                        r.notes = notes;
                        return Ok(r);
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut all_starts: Vec<Vec<f64>> = starts.to_vec();
    let spread = norm_inf(origin).max(1.0);
    for _ in 0..opts.random_starts {
        let p: Vec<f64> = match &inst.bounds {
            Some(b) => b.iter().map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect(),
            None => origin.iter().map(|c| c + spread * rng.gen_range(-1.0..=1.0)).collect(),
        };
        all_starts.push(p);
    }
    for start in all_starts {
        if start.len() != n {
            continue;
        }
        let mut p = start;
        if set.project_point(inst, &mut p).is_none() {
            continue;
        }
        let step0 = 0.5 * norm_inf(&p).max(1.0);
        for k in 0..opts.iterations {
            let (v, g) = sampled.max_with_grad(&p);
            if !v.is_finite() {
                break;
            }
            if v <= -SSC_TOL {
                if let Some(mut r) = attempt(&p, &mut verifications) {
                    r.reason = "subgradient-search".into();
                    r.notes = notes;
                    return Ok(r);
                }
            }
            let mut d = g;
            set.project_direction(&mut d);
            let nd = norm2(&d);
            if nd <= 1e-14 {
                break;
            }
            let step = step0 / ((k + 1) as f64).sqrt();
            for (x, dv) in p.iter_mut().zip(&d) {
                *x -= step * dv / nd;
            }
        }
    }
    notes.push("no Slater point found by line or multistart search".into());
    Ok(SscResult::unknown("search-failed", notes))
}
