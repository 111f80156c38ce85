//! Limit directions of gradient sequences.

use serde::{Deserialize, Serialize};

use super::{chord, unit, LimitRay, RayProvenance};
use crate::linsolve::least_squares;

/// Angular clustering tolerance (radians, measured as chord length).
pub const THETA_TOL: f64 = 1e-3;
/// Largest fit residual accepted for an extrapolated limit.
pub const EXTRAPOLATION_TOL: f64 = 1e-6;
/// Fewer tail points than this make extrapolation inconclusive.
pub const MIN_TAIL_POINTS: usize = 8;
const MAX_TAIL_POINTS: usize = 16;

/// Limit directions of one tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayEstimate {
    pub label: String,
    pub rays: Vec<LimitRay>,
    pub inconclusive: bool,
    pub warnings: Vec<String>,
    /// Residual of the polynomial fit, when one was attempted.
    pub fit_residual: Option<f64>,
}

struct Fit {
    limit: Vec<f64>,
    residual: f64,
}

/// Degree-2 least-squares fit of each component in `h`; the constant term
/// estimates the value at `h = 0`.
fn extrapolate(points: &[(f64, Vec<f64>)]) -> Option<Fit> {
    let h0 = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if !(h0 > 0.0) {
        return None;
    }
    let s: Vec<f64> = points.iter().map(|p| p.0 / h0).collect();
    let c0 = vec![1.0; s.len()];
    let c2: Vec<f64> = s.iter().map(|v| v * v).collect();
    let cols: [&[f64]; 3] = [&c0, &s, &c2];
    let dim = points[0].1.len();
    let mut limit = vec![0.0; dim];
    let mut residual: f64 = 0.0;
    for i in 0..dim {
        let b: Vec<f64> = points.iter().map(|p| p.1[i]).collect();
        let z = least_squares(&cols, &b)?;
        limit[i] = z[0];
        for (k, sk) in s.iter().enumerate() {
            residual = residual.max((z[0] + z[1] * sk + z[2] * sk * sk - b[k]).abs());
        }
    }
    Some(Fit { limit, residual })
}

/// Limit directions of the normalized vectors in `seq`, a list of
/// `(distance to the limit, vector)` ordered toward the limit.
///
/// Declared `hints` are used as given when the extrapolation is
/// inconclusive and are checked against it otherwise.
pub fn accumulation_rays(label: &str, seq: &[(f64, Vec<f64>)], hints: &[Vec<f64>]) -> RayEstimate {
    let mut out = RayEstimate {
        label: label.to_string(),
        rays: Vec::new(),
        inconclusive: false,
        warnings: Vec::new(),
        fit_residual: None,
    };
    let normalized: Vec<(f64, Vec<f64>)> = seq.iter().filter_map(|(h, v)| unit(v).map(|u| (*h, u))).collect();
    let hint_rays: Vec<LimitRay> = hints
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            unit(h).map(|direction| LimitRay {
                label: if hints.len() == 1 { label.to_string() } else { format!("{label}#{i}") },
                direction,
                provenance: RayProvenance::Declared,
                attained: false,
                residual: 0.0,
            })
        })
        .collect();
    if !seq.is_empty() && normalized.is_empty() {
        // vanishing gradients contribute nothing to the cone
        return out;
    }
    let window = &normalized[normalized.len().saturating_sub(MAX_TAIL_POINTS)..];
    let fit = if window.len() >= MIN_TAIL_POINTS { extrapolate(window) } else { None };
    let extrapolated = fit.and_then(|f| {
        out.fit_residual = Some(f.residual);
        let n = crate::linsolve::norm2(&f.limit);
        (f.residual <= EXTRAPOLATION_TOL && n >= 0.5).then(|| LimitRay {
            label: label.to_string(),
            direction: f.limit.iter().map(|v| v / n).collect(),
            provenance: RayProvenance::Extrapolated,
            attained: false,
            residual: f.residual,
        })
    });
    match extrapolated {
        Some(ray) => {
            let mut confirmed = false;
            for h in hint_rays {
                if chord(&h.direction, &ray.direction) <= THETA_TOL {
                    if !confirmed {
                        out.rays.push(h);
                        confirmed = true;
                    }
                } else {
                    out.warnings.push(format!("declared ray for {label} disagrees with the extrapolated limit and is ignored"));
                }
            }
            if !confirmed {
                out.rays.push(ray);
            }
        }
        None if !hint_rays.is_empty() => out.rays = hint_rays,
        None => {
            out.inconclusive = true;
            out.warnings.push(if window.len() < MIN_TAIL_POINTS {
                format!("{label}: {} tail points, at least {MIN_TAIL_POINTS} needed", window.len())
            } else {
                format!("{label}: tail directions do not settle (fit residual {:e})", out.fit_residual.unwrap_or(f64::NAN))
            });
        }
    }
    out
}

/// Keeps the first ray of every group within `theta` of each other.
pub fn cluster_rays(rays: Vec<LimitRay>, theta: f64) -> Vec<LimitRay> {
    let mut kept: Vec<LimitRay> = Vec::new();
    for r in rays {
        if !kept.iter().any(|k| chord(&k.direction, &r.direction) <= theta) {
            kept.push(r);
        }
    }
    kept
}
