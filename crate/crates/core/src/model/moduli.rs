//! Monte Carlo estimates of the uniform differentiability moduli.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::expr::{value_grad, Bindings};
use crate::linsolve::{dot, norm2};

use super::{materialize, MaterializeOptions, ModelError, SipInstance, Source};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityModuli {
    pub eta: Vec<f64>,
    /// Linearization error quotient relative to the base point.
    pub s: Vec<f64>,
    /// Strict version over pairs of nearby points.
    pub r: Vec<f64>,
    pub samples: Vec<usize>,
    /// Number of indices sampled per point.
    pub indices: usize,
}

impl UniformityModuli {
    /// The strict modulus decays to zero along the η grid.
    pub fn vanishing(&self) -> bool {
        match (self.r.first(), self.r.last()) {
            (Some(big), Some(small)) => *small <= 1e-9 || *small <= 0.1 * big,
            _ => false,
        }
    }
}

/// At most this many indices per family are sampled: the leading ones plus a
/// geometric selection further out.
const PER_FAMILY: usize = 48;

/// Uniform sample from the closed ball of `radius` around `center`.
pub(crate) fn uniform_in_ball(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let dir: Vec<f64> = loop {
        let g: Vec<f64> = center.iter().map(|_| rng.sample(StandardNormal)).collect();
        if norm2(&g) > 0.0 {
            break g;
        }
    };
    let scale = radius * rng.gen::<f64>().powf(1.0 / center.len() as f64) / norm2(&dir);
    center.iter().zip(&dir).map(|(c, v)| c + scale * v).collect()
}

/// Estimates `s(η)` and `r(η)` at `x` by sampling point pairs in balls of
/// radius η. `eta` is processed in ascending order; each η has its own seeded
/// stream, so results grow monotonically in the sample count, and suprema
/// are carried forward so they grow monotonically in η.
pub fn estimate_moduli(
    inst: &SipInstance,
    x: &[f64],
    eta: &[f64],
    samples: usize,
    seed: u64,
) -> Result<UniformityModuli, ModelError> {
    let mat = materialize(inst, x, &MaterializeOptions::default())?;
    let res = mat.analysis_resolution();
    let mut picked: Vec<(Source, Option<f64>, Vec<f64>)> = Vec::new();
    let mut per_family: Vec<Vec<(Option<f64>, Vec<f64>)>> = vec![Vec::new(); inst.families.len()];
    for e in mat.select(res).filter(|e| !e.is_limit()) {
        match e.source {
            Source::Fixed(_) => picked.push((e.source, None, e.grad.clone())),
            Source::Family(f) => per_family[f].push((e.t, e.grad.clone())),
        }
    }
    for (f, list) in per_family.into_iter().enumerate() {
        let len = list.len();
        let mut take: Vec<usize> = (0..len.min(PER_FAMILY / 2)).collect();
        let mut k = PER_FAMILY / 2;
        while k < len && take.len() < PER_FAMILY {
            take.push(k);
            k = (k as f64 * 1.5).ceil() as usize;
        }
        if len > 0 && !take.contains(&(len - 1)) {
            take.push(len - 1);
        }
        for i in take {
            picked.push((Source::Family(f), list[i].0, list[i].1.clone()));
        }
    }
    let eval = |src: Source, t: Option<f64>, p: &[f64]| -> Result<f64, ModelError> {
        let (body, idx) = match src {
            Source::Fixed(i) => (&inst.fixed[i].body, None),
            Source::Family(f) => (&inst.families[f].body, Some(inst.families[f].index.as_str())),
        };
        let binding;
        let b = match (idx, t) {
            (Some(name), Some(tv)) => {
                binding = [(name, tv)];
                Bindings::with_index(p, &binding)
            }
            _ => Bindings::new(p),
        };
        value_grad(body, &b)
            .map(|(v, _)| v)
            .map_err(|source| ModelError::Eval {
                label: "modulus sample".into(),
                source,
            })
    };
    let base: Vec<f64> = picked
        .iter()
        .map(|(s, t, _)| eval(*s, *t, x))
        .collect::<Result<_, _>>()?;

    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|a, b| eta[*a].total_cmp(&eta[*b]));
    let mut s_out = vec![0.0; eta.len()];
    let mut r_out = vec![0.0; eta.len()];
    let (mut s_run, mut r_run) = (0.0f64, 0.0f64);
    for &i in &order {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for _ in 0..samples {
            let p = uniform_in_ball(&mut rng, x, eta[i]);
            let q = uniform_in_ball(&mut rng, x, eta[i]);
            let dp: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
            let dpq: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a - b).collect();
            let (np, npq) = (norm2(&dp), norm2(&dpq));
            for (j, (src, t, grad)) in picked.iter().enumerate() {
                let gp = eval(*src, *t, &p)?;
                let gq = eval(*src, *t, &q)?;
                if np > 0.0 {
                    s_run = s_run.max((gp - base[j] - dot(grad, &dp)).abs() / np);
                }
                if npq > 0.0 {
                    r_run = r_run.max((gp - gq - dot(grad, &dpq)).abs() / npq);
                }
            }
        }
        // pairs with the base point are admissible for the strict modulus
        r_run = r_run.max(s_run);
        s_out[i] = s_run;
        r_out[i] = r_run;
    }
    Ok(UniformityModuli {
        eta: eta.to_vec(),
        s: s_out,
        r: r_out,
        samples: vec![samples; eta.len()],
        indices: picked.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_instance;

    fn ex37() -> SipInstance {
        parse_instance(
            "[problem]\nvars = x1 x2\n[index n]\nkind = countable\nstart = 2\n[constraints]\ng1 = x1 + 1\ng(n) = x1^3/(3*n) - x2\n",
        )
        .unwrap()
    }

    #[test]
    fn affine_family_has_zero_moduli() {
        let inst = parse_instance(
            "[problem]\nvars = x1 x2\n[index t]\nkind = interval\nlower = 0\nupper = 1\n[constraints]\ng(t) = t*x1 - (1-t)*x2 + t^2\n",
        )
        .unwrap();
        let m = estimate_moduli(&inst, &[0.3, -0.2], &[0.1, 0.01], 200, 7).unwrap();
        assert!(m.s.iter().chain(&m.r).all(|v| *v < 1e-12));
    }

    /// Dense sampling oracle for the strict modulus of x1^3/(3n) restricted
    /// to x1 (the only nonlinear direction), n = 2.
    fn oracle_r(eta: f64) -> f64 {
        let mut best: f64 = 0.0;
        let steps = 1000;
        for i in 0..=steps {
            for j in 0..=steps {
                let a = -1.0 - eta + 2.0 * eta * i as f64 / steps as f64;
                let b = -1.0 - eta + 2.0 * eta * j as f64 / steps as f64;
                if i != j {
                    let q = ((a.powi(3) - b.powi(3)) / 6.0 - 0.5 * (a - b)).abs() / (a - b).abs();
                    best = best.max(q);
                }
            }
        }
        best
    }

    #[test]
    fn countable_family_moduli() {
        let etas = [0.1, 0.01, 0.001];
        let m = estimate_moduli(&ex37(), &[-1.0, 0.0], &etas, 400, 1).unwrap();
        let r01 = m.r[0];
        assert!(r01 > 0.0 && r01 <= 0.25, "{r01}");
        assert!(r01 <= oracle_r(0.1) + 1e-12);
        assert!(r01 >= 0.5 * oracle_r(0.1));
        // estimates shrink with eta
        assert!(m.r[2] < m.r[1] && m.r[1] < m.r[0]);
        assert!(m.vanishing());
        for i in 0..3 {
            assert!(m.s[i] <= m.r[i] + 1e-12);
        }
    }

    #[test]
    fn more_samples_never_lower_the_estimate() {
        let small = estimate_moduli(&ex37(), &[-1.0, 0.0], &[0.05], 50, 3).unwrap();
        let large = estimate_moduli(&ex37(), &[-1.0, 0.0], &[0.05], 200, 3).unwrap();
        assert!(large.r[0] >= small.r[0] && large.s[0] >= small.s[0]);
    }
}
