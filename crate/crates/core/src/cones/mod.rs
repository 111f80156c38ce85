//! Finitely generated cones with lineality and limit rays.

mod rays;

use serde::{Deserialize, Serialize};

use crate::linsolve::{
    cone_feasibility, dot, least_squares, max_margin_direction, norm2, norm_inf, rank_nullspace, ConeAnswer,
    FeasibilityCertificate, LinsolveError, Matrix, Separator,
};
use crate::model::{family_tails, materialize, FamilyTail, MaterializeOptions, ModelError, SipInstance};

pub use rays::{accumulation_rays, cluster_rays, RayEstimate, EXTRAPOLATION_TOL, MIN_TAIL_POINTS, THETA_TOL};

/// Rays closer than this (chord length of unit vectors) to some generator
/// direction count as attained.
pub const ATTAINED_TOL: f64 = 1e-9;
/// Membership and separation tolerance used by the closedness diagnostic.
pub const CLOSEDNESS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledVector {
    pub label: String,
    pub vector: Vec<f64>,
}

impl LabeledVector {
    pub fn new(label: impl Into<String>, vector: Vec<f64>) -> Self {
        LabeledVector {
            label: label.into(),
            vector,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RayProvenance {
    Declared,
    Extrapolated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitRay {
    pub label: String,
    /// Unit Euclidean norm.
    pub direction: Vec<f64>,
    pub provenance: RayProvenance,
    /// Parallel to some finite generator.
    pub attained: bool,
    /// Fit residual of the extrapolation; zero for declared rays.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Closedness {
    Closed,
    NotClosed,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosednessWitness {
    pub ray: LimitRay,
    pub separator: Separator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosednessVerdict {
    pub status: Closedness,
    pub witness: Option<ClosednessWitness>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCone {
    pub dim: usize,
    pub generators: Vec<LabeledVector>,
    pub lineality: Vec<Vec<f64>>,
    pub rays: Vec<LimitRay>,
    pub closedness: Closedness,
}

impl GeneratedCone {
    /// Cone without rays; closedness is left `Unknown` until diagnosed.
    pub fn new(dim: usize, generators: Vec<LabeledVector>, lineality: Vec<Vec<f64>>) -> Result<Self, LinsolveError> {
        let bad = generators.iter().map(|g| g.vector.len()).chain(lineality.iter().map(Vec::len)).find(|l| *l != dim);
        if let Some(l) = bad {
            return Err(LinsolveError::Dimension(format!("vector of length {l} in a cone of dimension {dim}")));
        }
        Ok(GeneratedCone {
            dim,
            generators,
            lineality: independent_basis(lineality),
            rays: Vec::new(),
            closedness: Closedness::Unknown,
        })
    }

    /// Attaches clustered rays from `tails` and runs the closedness diagnostic.
    pub fn with_tails(self, tails: &[RayEstimate]) -> Result<Self, LinsolveError> {
        let verdict = closedness_diagnostic(&self.generators, tails)?;
        let mut c = self.attach_rays(tails)?;
        c.closedness = verdict.status;
        Ok(c)
    }

    /// Attaches clustered rays from `tails`; closedness is left untouched.
    pub fn attach_rays(mut self, tails: &[RayEstimate]) -> Result<Self, LinsolveError> {
        let mut rays: Vec<LimitRay> = tails.iter().flat_map(|t| t.rays.iter().cloned()).collect();
        if let Some(r) = rays.iter().find(|r| r.direction.len() != self.dim) {
            return Err(LinsolveError::Dimension(format!("ray {} has length {}", r.label, r.direction.len())));
        }
        rays = cluster_rays(rays, THETA_TOL);
        mark_attained(&mut rays, &self.generators);
        self.rays = rays;
        Ok(self)
    }

    /// Columns: generators, followed by rays when `use_rays`.
    pub fn generator_matrix(&self, use_rays: bool) -> Matrix {
        let mut cols: Vec<Vec<f64>> = self.generators.iter().map(|g| g.vector.clone()).collect();
        if use_rays {
            cols.extend(self.rays.iter().map(|r| r.direction.clone()));
        }
        Matrix::from_columns(self.dim, &cols)
    }

    pub fn lineality_matrix(&self) -> Matrix {
        Matrix::from_columns(self.dim, &self.lineality)
    }

    /// Label of column `j` of [`GeneratedCone::generator_matrix`].
    pub fn column_label(&self, j: usize) -> &str {
        if j < self.generators.len() {
            &self.generators[j].label
        } else {
            &self.rays[j - self.generators.len()].label
        }
    }
}

fn independent_basis(vectors: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        if norm2(&v) == 0.0 {
            continue;
        }
        let mut trial = kept.clone();
        trial.push(v.clone());
        let d = v.len();
        let (rank, _) = rank_nullspace(&Matrix::from_columns(d, &trial).transpose(), 1e-10);
        if rank == trial.len() {
            kept.push(v);
        }
    }
    kept
}

/// Membership of `v` in `cone(generators [∪ rays]) + span(lineality)`.
/// Certificate multipliers follow the column order of
/// [`GeneratedCone::generator_matrix`].
pub fn membership(c: &GeneratedCone, v: &[f64], tol: f64, use_rays: bool) -> Result<ConeAnswer, LinsolveError> {
    if v.len() != c.dim {
        return Err(LinsolveError::Dimension(format!("vector of length {} against cone of dimension {}", v.len(), c.dim)));
    }
    cone_feasibility(&c.generator_matrix(use_rays), &c.lineality_matrix(), v, tol)
}

fn residual_of(g: &Matrix, h: &Matrix, lambda: &[f64], y: &[f64], v: &[f64]) -> f64 {
    let r: Vec<f64> = (0..v.len()).map(|i| v[i] - dot(g.row(i), lambda) - dot(h.row(i), y)).collect();
    norm_inf(&r)
}

/// Shrinks the support of a certificate to linearly independent generators.
///
/// Columns are those of `generator_matrix(use_rays)` where `use_rays` is
/// inferred from the multiplier count.
pub fn caratheodory_reduce(cert: &FeasibilityCertificate, c: &GeneratedCone, v: &[f64]) -> FeasibilityCertificate {
    let use_rays = cert.lambda.len() > c.generators.len();
    let g = c.generator_matrix(use_rays);
    let h = c.lineality_matrix();
    if g.cols() != cert.lambda.len() || v.len() != c.dim {
        return cert.clone();
    }
    let d = c.dim;
    let start = residual_of(&g, &h, &cert.lambda, &cert.y, v);
    let mut lambda: Vec<f64> = cert.lambda.iter().map(|l| l.max(0.0)).collect();
    let support = |lambda: &[f64]| -> Vec<usize> { (0..lambda.len()).filter(|&j| lambda[j] > 0.0).collect() };
    loop {
        let s = support(&lambda);
        if s.is_empty() {
            break;
        }
        let cols: Vec<Vec<f64>> = s.iter().map(|&j| g.column(j)).collect();
        let (rank, kernel) = rank_nullspace(&Matrix::from_columns(d, &cols), 1e-10);
        if rank == s.len() || kernel.is_empty() {
            break;
        }
        let mut z = kernel[0].clone();
        if !z.iter().any(|v| *v > 1e-12) {
            z.iter_mut().for_each(|v| *v = -*v);
        }
        let mut best: Option<(usize, f64)> = None;
        for (k, &zi) in z.iter().enumerate() {
            if zi > 1e-12 {
                let ratio = lambda[s[k]] / zi;
                if best.is_none_or(|(_, b)| ratio < b) {
                    best = Some((k, ratio));
                }
            }
        }
        let Some((kmin, alpha)) = best else { break };
        for (k, &zi) in z.iter().enumerate() {
            lambda[s[k]] = (lambda[s[k]] - alpha * zi).max(0.0);
        }
        lambda[s[kmin]] = 0.0;
    }
    // refit on the final support together with the lineality part
    let s = support(&lambda);
    let mut y = cert.y.clone();
    let mut cols: Vec<Vec<f64>> = s.iter().map(|&j| g.column(j)).collect();
    cols.extend(h.columns());
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    if let Some(z) = least_squares(&refs, v) {
        if z[..s.len()].iter().all(|x| *x >= 0.0) {
            let mut trial = vec![0.0; lambda.len()];
            for (k, &j) in s.iter().enumerate() {
                trial[j] = z[k];
            }
            let ty = z[s.len()..].to_vec();
            if residual_of(&g, &h, &trial, &ty, v) <= residual_of(&g, &h, &lambda, &y, v) {
                lambda = trial;
                y = ty;
            }
        }
    }
    let residual = residual_of(&g, &h, &lambda, &y, v);
    if residual > start.max(cert.residual) + 1e-12 * (1.0 + norm_inf(v)) {
        return cert.clone();
    }
    FeasibilityCertificate { lambda, y, residual }
}

/// `(∇g_t(x), <∇g_t(x), x> − g_t(x))` for every materialized index at the
/// analysis resolution.
pub fn augmented_generators(inst: &SipInstance, x: &[f64]) -> Result<Vec<LabeledVector>, ModelError> {
    let mat = materialize(inst, x, &MaterializeOptions::default())?;
    let res = mat.analysis_resolution();
    Ok(mat
        .select(res)
        .filter(|e| !e.is_limit())
        .map(|e| LabeledVector::new(e.label.clone(), augment(&e.grad, e.value, x)))
        .collect())
}

/// Points per tail sequence handed to [`accumulation_rays`].
pub const TAIL_POINTS: usize = 16;

/// Limit directions of every family tail at `x`, for the gradient cone or,
/// with `augmented`, for the augmented generators. Declared hints live in
/// gradient space and are only used for the former.
pub fn family_rays(inst: &SipInstance, x: &[f64], augmented: bool) -> Result<Vec<(FamilyTail, RayEstimate)>, ModelError> {
    let tails = family_tails(inst, x, TAIL_POINTS, None)?;
    Ok(tails
        .into_iter()
        .map(|tail| {
            let seq: Vec<(f64, Vec<f64>)> = tail
                .points
                .iter()
                .map(|p| (p.h, if augmented { augment(&p.grad, p.value, x) } else { p.grad.clone() }))
                .collect();
            let hints: &[Vec<f64>] = if augmented { &[] } else { &tail.hints };
            let est = accumulation_rays(&tail.label, &seq, hints);
            (tail, est)
        })
        .collect())
}

pub(crate) fn augment(grad: &[f64], value: f64, x: &[f64]) -> Vec<f64> {
    let mut v = grad.to_vec();
    v.push(dot(grad, x) - value);
    v
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm2(v);
    (n > 0.0 && n.is_finite()).then(|| v.iter().map(|x| x / n).collect())
}

pub(crate) fn chord(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sets `attained` on every ray parallel to some generator.
pub fn mark_attained(rays: &mut [LimitRay], generators: &[LabeledVector]) {
    let units: Vec<Vec<f64>> = generators.iter().filter_map(|g| unit(&g.vector)).collect();
    for r in rays.iter_mut() {
        r.attained = units.iter().any(|u| chord(u, &r.direction) <= ATTAINED_TOL);
    }
}

/// Tri-state closedness of `cone(generators)` given the limit directions of
/// its infinite families.
///
/// * no tails: a finitely generated cone, `Closed`;
/// * a ray outside the cone of the generators with a verified separator:
///   `NotClosed`;
/// * every ray absorbed, every tail conclusive and `0` outside the convex
///   hull of the normalized generators and rays: `Closed`;
/// * otherwise `Unknown`.
pub fn closedness_diagnostic(generators: &[LabeledVector], tails: &[RayEstimate]) -> Result<ClosednessVerdict, LinsolveError> {
    let gens: Vec<&LabeledVector> = generators.iter().filter(|g| norm2(&g.vector) > 0.0).collect();
    let dim = generators
        .first()
        .map(|g| g.vector.len())
        .or_else(|| tails.iter().flat_map(|t| &t.rays).map(|r| r.direction.len()).next())
        .unwrap_or(0);
    if tails.is_empty() {
        return Ok(ClosednessVerdict {
            status: Closedness::Closed,
            witness: None,
            reason: "finitely-generated".into(),
        });
    }
    let mut rays: Vec<LimitRay> = tails.iter().flat_map(|t| t.rays.iter().cloned()).collect();
    let owned: Vec<LabeledVector> = gens.iter().map(|g| (*g).clone()).collect();
    mark_attained(&mut rays, &owned);
    let gm = Matrix::from_columns(dim, &owned.iter().map(|g| g.vector.clone()).collect::<Vec<_>>());
    let empty = Matrix::zeros(dim, 0);
    let mut all_absorbed = true;
    for ray in rays.iter().filter(|r| !r.attained) {
        match cone_feasibility(&gm, &empty, &ray.direction, CLOSEDNESS_TOL) {
            Ok(ConeAnswer::Member(_)) => {}
            Ok(ConeAnswer::Separated(separator)) => {
                return Ok(ClosednessVerdict {
                    status: Closedness::NotClosed,
                    witness: Some(ClosednessWitness {
                        ray: ray.clone(),
                        separator,
                    }),
                    reason: "unattained-limit-ray".into(),
                });
            }
            Err(LinsolveError::Unverified { .. }) => all_absorbed = false,
            Err(e) => return Err(e),
        }
    }
    let inconclusive = tails.iter().any(|t| t.inconclusive);
    if !all_absorbed || inconclusive {
        return Ok(ClosednessVerdict {
            status: Closedness::Unknown,
            witness: None,
            reason: if inconclusive { "inconclusive-extrapolation" } else { "unverified-ray" }.into(),
        });
    }
    let mut normalized: Vec<Vec<f64>> = owned.iter().filter_map(|g| unit(&g.vector)).collect();
    normalized.extend(rays.iter().map(|r| r.direction.clone()));
    let margin = max_margin_direction(&Matrix::from_columns(dim, &normalized), &empty)?;
    if margin.margin > CLOSEDNESS_TOL {
        Ok(ClosednessVerdict {
            status: Closedness::Closed,
            witness: None,
            reason: "compact-base".into(),
        })
    } else {
        Ok(ClosednessVerdict {
            status: Closedness::Unknown,
            witness: None,
            reason: "not-pointed".into(),
        })
    }
}
