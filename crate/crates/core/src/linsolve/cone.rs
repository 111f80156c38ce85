//! Cone membership and maximum-margin LPs.

use serde::{Deserialize, Serialize};

use super::lsq::{deflate, nnls};
use super::matrix::{dot, norm_inf, orthonormalize};
use super::simplex::{simplex_solve, LpProblem, LpStatus};
use super::{LinsolveError, Matrix};

/// Tolerance used when re-checking a separating functional.
pub const SEPARATOR_TOL: f64 = 1e-9;

/// `v = G λ + H y` with `λ >= 0`, up to `residual` in the max norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCertificate {
    pub lambda: Vec<f64>,
    pub y: Vec<f64>,
    pub residual: f64,
}

/// A functional `a` with `<a, v> > 0`, `<a, g_i> <= 0` and `<a, h_j> = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separator {
    pub functional: Vec<f64>,
    /// `<a, v>`
    pub value: f64,
    /// `max_i <a, g_i>`, or `-inf` without generators.
    pub max_generator: f64,
    /// `max_j |<a, h_j>|`
    pub max_lineality: f64,
    /// Best residual found by the feasibility LP.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConeAnswer {
    Member(FeasibilityCertificate),
    Separated(Separator),
}

impl ConeAnswer {
    pub fn is_member(&self) -> bool {
        matches!(self, ConeAnswer::Member(_))
    }
}

fn check_dims(g: &Matrix, h: &Matrix, d: usize) -> Result<(), LinsolveError> {
    if g.rows() != d || h.rows() != d {
        return Err(LinsolveError::Dimension(format!(
            "generators have {} rows, lineality {} rows, expected {d}",
            g.rows(),
            h.rows()
        )));
    }
    if !g.is_finite() || !h.is_finite() {
        return Err(LinsolveError::NonFinite);
    }
    Ok(())
}

/// Decides whether `v` lies in `cone(columns of g) + span(columns of h)`.
///
/// Solves `min 1·(p + q)` over `G λ + H y + p - q = v`. A residual at most
/// `tol` yields a certificate; otherwise the optimal duals give a separating
/// functional, normalized to unit max norm and re-checked before it is
/// returned.
pub fn cone_feasibility(g: &Matrix, h: &Matrix, v: &[f64], tol: f64) -> Result<ConeAnswer, LinsolveError> {
    let d = v.len();
    check_dims(g, h, d)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(LinsolveError::NonFinite);
    }
    let (k, m) = (g.cols(), h.cols());
    if norm_inf(v) <= tol {
        return Ok(ConeAnswer::Member(FeasibilityCertificate {
            lambda: vec![0.0; k],
            y: vec![0.0; m],
            residual: norm_inf(v),
        }));
    }
    let nv = k + m + 2 * d;
    let mut a = Matrix::zeros(d, nv);
    for i in 0..d {
        for j in 0..k {
            a[(i, j)] = g[(i, j)];
        }
        for j in 0..m {
            a[(i, k + j)] = h[(i, j)];
        }
        a[(i, k + m + i)] = 1.0;
        a[(i, k + m + d + i)] = -1.0;
    }
    let mut c = vec![0.0; nv];
    c[k + m..].iter_mut().for_each(|x| *x = 1.0);
    let mut lower = vec![0.0; nv];
    lower[k..k + m].iter_mut().for_each(|x| *x = f64::NEG_INFINITY);
    let lp = LpProblem {
        objective: c,
        a_eq: a,
        b_eq: v.to_vec(),
        lower,
        upper: vec![f64::INFINITY; nv],
    };
    let sol = simplex_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        // the LP is always feasible and bounded below by zero
        return Err(LinsolveError::Unverified { residual: f64::NAN });
    }
    let lambda: Vec<f64> = sol.x[..k].iter().map(|x| x.max(0.0)).collect();
    let y = sol.x[k..k + m].to_vec();
    let mut r = v.to_vec();
    for i in 0..d {
        r[i] -= dot(g.row(i), &lambda) + dot(h.row(i), &y);
    }
    let residual = norm_inf(&r);
    if residual <= tol {
        return Ok(ConeAnswer::Member(FeasibilityCertificate { lambda, y, residual }));
    }
    let gt = g.transpose();
    let ht = h.transpose();
    let check = |w: &[f64]| -> Option<Separator> {
        let scale = norm_inf(w);
        if !(scale > 0.0) || w.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let a: Vec<f64> = w.iter().map(|x| x / scale).collect();
        let value = dot(&a, v);
        let max_generator = (0..k).map(|j| dot(gt.row(j), &a)).fold(f64::NEG_INFINITY, f64::max);
        let max_lineality = (0..m).map(|j| dot(ht.row(j), &a).abs()).fold(0.0, f64::max);
        (value > 0.0 && max_generator <= SEPARATOR_TOL && max_lineality <= SEPARATOR_TOL).then_some(Separator {
            functional: a,
            value,
            max_generator,
            max_lineality,
            residual,
        })
    };
    // Prefer v minus its projection onto the cone: unlike an LP vertex it
    // does not depend on pivoting order.
    if let Some(sep) = check(&projection_residual(g, h, v)) {
        return Ok(ConeAnswer::Separated(sep));
    }
    if let Some(sep) = check(&sol.duals) {
        return Ok(ConeAnswer::Separated(sep));
    }
    Err(LinsolveError::Unverified { residual })
}

/// `v − P(v)` where `P` is the Euclidean projection onto `cone(G) + span(H)`.
pub fn projection_residual(g: &Matrix, h: &Matrix, v: &[f64]) -> Vec<f64> {
    let mut vecs = g.columns();
    vecs.push(v.to_vec());
    deflate(&h.columns(), &mut vecs);
    let pv = vecs.pop().unwrap_or_default();
    let lambda = nnls(&vecs, &pv);
    let mut r = pv;
    for (col, l) in vecs.iter().zip(&lambda) {
        if *l != 0.0 {
            for (ri, ci) in r.iter_mut().zip(col) {
                *ri -= l * ci;
            }
        }
    }
    r
}

/// Result of [`max_margin_direction`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginResult {
    /// Unit-bounded direction orthogonal to every lineality column.
    pub direction: Vec<f64>,
    /// `min_i -<g_i, direction>`, evaluated exactly for the returned direction.
    pub margin: f64,
}

/// Best uniform descent margin `max_{‖x‖∞<=1, Hᵀx=0} min_i -<g_i, x>`.
///
/// Solved in its dual form, `min ‖G λ + H μ‖₁` over the simplex `Σλ = 1`;
/// the duals of that LP are the direction. The direction is then projected
/// onto the kernel of `Hᵀ` and the margin recomputed, so the reported value
/// never overstates what the direction achieves.
pub fn max_margin_direction(g: &Matrix, h: &Matrix) -> Result<MarginResult, LinsolveError> {
    let d = g.rows();
    check_dims(g, h, d)?;
    let (k, m) = (g.cols(), h.cols());
    if k == 0 {
        return Ok(MarginResult {
            direction: vec![0.0; d],
            margin: f64::INFINITY,
        });
    }
    let nv = k + m + 2 * d;
    let mut a = Matrix::zeros(d + 1, nv);
    for i in 0..d {
        for j in 0..k {
            a[(i, j)] = g[(i, j)];
        }
        for j in 0..m {
            a[(i, k + j)] = h[(i, j)];
        }
        a[(i, k + m + i)] = -1.0;
        a[(i, k + m + d + i)] = 1.0;
    }
    for j in 0..k {
        a[(d, j)] = 1.0;
    }
    let mut c = vec![0.0; nv];
    c[k + m..].iter_mut().for_each(|x| *x = 1.0);
    let mut lower = vec![0.0; nv];
    lower[k..k + m].iter_mut().for_each(|x| *x = f64::NEG_INFINITY);
    let mut b = vec![0.0; d + 1];
    b[d] = 1.0;
    let lp = LpProblem {
        objective: c,
        a_eq: a,
        b_eq: b,
        lower,
        upper: vec![f64::INFINITY; nv],
    };
    let sol = simplex_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(LinsolveError::Unverified { residual: f64::NAN });
    }
    let mut x: Vec<f64> = sol.duals[..d].to_vec();
    let q = orthonormalize(&h.columns(), 1e-10);
    for qv in &q {
        let c = dot(&x, qv);
        for (xi, qi) in x.iter_mut().zip(qv) {
            *xi -= c * qi;
        }
    }
    let s = norm_inf(&x);
    if s > 1.0 {
        x.iter_mut().for_each(|v| *v /= s);
    }
    let gt = g.transpose();
    let margin = (0..k).map(|j| -dot(gt.row(j), &x)).fold(f64::INFINITY, f64::min);
    Ok(MarginResult { direction: x, margin })
}
