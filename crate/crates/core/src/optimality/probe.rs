//! Sampling check of the Fréchet normal inequality.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{equality_rows, OptimalityError};
use crate::cq::require_feasible;
use crate::linsolve::{dot, norm2, orthonormalize};
use crate::model::{materialize, uniform_in_ball, IndexSample, MaterializeOptions, ModelError, SipInstance};

/// Fewer feasible samples than this make the probe inconclusive.
pub const MIN_FEASIBLE_SAMPLES: usize = 20;
const SAMPLE_PER_FAMILY: usize = 400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRadius {
    pub radius: f64,
    pub feasible: usize,
    /// `-inf` when no sample was feasible.
    pub quotient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub direction: Vec<f64>,
    /// `max <v, x − x̄> / |x − x̄|` over feasible samples at every radius.
    pub max_quotient: f64,
    pub radii: Vec<ProbeRadius>,
    pub sampled: usize,
    pub feasible: usize,
    pub inconclusive: bool,
}

/// Samples `samples` points in each of the balls of radius `r`, `r/10` and
/// `r/100` around `x` and keeps the feasible ones. With equalities the
/// displacement is projected onto the Jacobian kernel and corrected back
/// onto the equality set.
pub fn empirical_normal_cone_probe(
    inst: &SipInstance,
    x: &[f64],
    v: &[f64],
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<ProbeResult, OptimalityError> {
    if v.len() != inst.n() {
        return Err(ModelError::Validation(format!("probe direction has {} entries, expected {}", v.len(), inst.n())).into());
    }
    let mat = materialize(inst, x, &MaterializeOptions::default())?;
    require_feasible(inst, &mat)?;
    let sample = IndexSample::new(inst, &mat, SAMPLE_PER_FAMILY);
    let basis = orthonormalize(&equality_rows(inst, x)?, 1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut radii = Vec::new();
    for r in [radius, radius / 10.0, radius / 100.0] {
        let mut feasible = 0;
        let mut quotient = f64::NEG_INFINITY;
        for _ in 0..samples {
            let mut p = uniform_in_ball(&mut rng, x, r);
            if !basis.is_empty() {
                let mut d: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
                for q in &basis {
                    let c = dot(&d, q);
                    d.iter_mut().zip(q).for_each(|(di, qi)| *di -= c * qi);
                }
                p = x.iter().zip(&d).map(|(a, b)| a + b).collect();
                if !inst.restore_equalities(&mut p, 1e-12)? {
                    continue;
                }
            }
            if sample.max_value(&p) > 0.0 {
                continue;
            }
            let d: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
            let nd = norm2(&d);
            if nd == 0.0 {
                continue;
            }
            feasible += 1;
            quotient = quotient.max(dot(v, &d) / nd);
        }
        radii.push(ProbeRadius { radius: r, feasible, quotient });
    }
    let feasible: usize = radii.iter().map(|r| r.feasible).sum();
    Ok(ProbeResult {
        direction: v.to_vec(),
        max_quotient: radii.iter().map(|r| r.quotient).fold(f64::NEG_INFINITY, f64::max),
        sampled: 3 * samples,
        feasible,
        inconclusive: feasible < MIN_FEASIBLE_SAMPLES,
        radii,
    })
}
