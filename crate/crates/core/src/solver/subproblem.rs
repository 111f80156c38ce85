//! Finite subproblems: augmented Lagrangian outer loop, BFGS inner loop with
//! Armijo backtracking.

use crate::expr::{value_grad, Bindings};
use crate::linsolve::{dot, norm_inf};
use crate::model::{evaluate_index, Cost, SipInstance, Source};

use super::SolverConfig;

/// Constraints kept explicitly by the exchange loop.
pub(crate) struct Subproblem<'a> {
    pub inst: &'a SipInstance,
    pub working: &'a [(Source, Option<f64>)],
}

type ValGrad = (f64, Vec<f64>);

pub(crate) struct Evaluated {
    pub cost: ValGrad,
    pub ineq: Vec<ValGrad>,
    pub eq: Vec<ValGrad>,
}

#[derive(Clone, Debug)]
pub(crate) struct SubSolution {
    /// Point in the original variables.
    pub x: Vec<f64>,
    pub cost: f64,
    /// Largest working-set or equality violation.
    pub violation: f64,
}

impl Subproblem<'_> {
    /// A `ConvexMax` cost is handled through its epigraph: one extra variable
    /// `z` and constraints `f_i(x) - z <= 0`.
    fn epigraph(&self) -> bool {
        matches!(self.inst.cost, Cost::ConvexMax(_))
    }

    /// Extended start for `x`.
    pub fn lift(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut z = x.to_vec();
        if self.epigraph() {
            z.push(self.inst.cost_value(x).ok()?);
        }
        Some(z)
    }

    pub fn eval(&self, z: &[f64]) -> Option<Evaluated> {
        let n = self.inst.n();
        let x = &z[..n];
        let pad = |mut g: Vec<f64>, last: f64| {
            if self.epigraph() {
                g.push(last);
            }
            g
        };
        let mut ineq = Vec::with_capacity(self.working.len());
        for &(s, t) in self.working {
            let (v, g) = evaluate_index(self.inst, s, t, x).ok()?;
            ineq.push((v, pad(g, 0.0)));
        }
        let cost = match &self.inst.cost {
            Cost::Smooth(e) => {
                let (v, g) = value_grad(e, &Bindings::new(x)).ok()?;
                (v, g)
            }
            Cost::ConvexMax(pieces) => {
                for p in pieces {
                    let (v, g) = value_grad(p, &Bindings::new(x)).ok()?;
                    ineq.push((v - z[n], pad(g, -1.0)));
                }
                let mut g = vec![0.0; n + 1];
                g[n] = 1.0;
                (z[n], g)
            }
        };
        let eq = self
            .inst
            .equality_jacobian(x)
            .ok()?
            .into_iter()
            .map(|(v, g)| (v, pad(g, 0.0)))
            .collect();
        let all_finite = std::iter::once(&cost).chain(&ineq).chain(&eq).all(|(v, g)| v.is_finite() && g.iter().all(|c| c.is_finite()));
        all_finite.then_some(Evaluated { cost, ineq, eq })
    }
}

fn violation(e: &Evaluated) -> f64 {
    let gi = e.ineq.iter().map(|(v, _)| v.max(0.0)).fold(0.0, f64::max);
    let he = e.eq.iter().map(|(v, _)| v.abs()).fold(0.0, f64::max);
    gi.max(he)
}

struct Multipliers {
    mu: Vec<f64>,
    nu: Vec<f64>,
    rho: f64,
}

fn merit(e: &Evaluated, m: &Multipliers) -> ValGrad {
    let (mut val, mut grad) = e.cost.clone();
    for ((g, dg), mu) in e.ineq.iter().zip(&m.mu) {
        let s = (mu + m.rho * g).max(0.0);
        val += (s * s - mu * mu) / (2.0 * m.rho);
        grad.iter_mut().zip(dg).for_each(|(a, b)| *a += s * b);
    }
    for ((h, dh), nu) in e.eq.iter().zip(&m.nu) {
        val += nu * h + 0.5 * m.rho * h * h;
        let s = nu + m.rho * h;
        grad.iter_mut().zip(dh).for_each(|(a, b)| *a += s * b);
    }
    (val, grad)
}

/// Values beyond this are treated as divergence to an unbounded subproblem.
const DIVERGED: f64 = 1e12;

/// Quasi-Newton minimization of the merit function from `z`.
fn bfgs(sub: &Subproblem, m: &Multipliers, mut z: Vec<f64>, cfg: &SolverConfig) -> Option<Vec<f64>> {
    let d = z.len();
    let f = |z: &[f64]| sub.eval(z).map(|e| merit(&e, m));
    let (mut val, mut grad) = f(&z)?;
    let mut hinv: Vec<Vec<f64>> = identity(d);
    for _ in 0..cfg.inner_iterations {
        if norm_inf(&grad) <= cfg.gradient_tol {
            break;
        }
        let mut dir: Vec<f64> = hinv.iter().map(|row| -dot(row, &grad)).collect();
        let mut slope = dot(&dir, &grad);
        if slope >= 0.0 || !slope.is_finite() {
            hinv = identity(d);
            dir = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = z.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            if let Some((v, g)) = f(&trial) {
                if v <= val + cfg.armijo * step * slope {
                    accepted = Some((trial, v, g));
                    break;
                }
            }
            step *= cfg.backtrack;
        }
        let Some((trial, v, g)) = accepted else { break };
        let s: Vec<f64> = trial.iter().zip(&z).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let small_step = norm_inf(&s) <= 1e-16 * (1.0 + norm_inf(&z));
        z = trial;
        val = v;
        grad = g;
        if val < -DIVERGED || norm_inf(&z) > DIVERGED {
            return None;
        }
        if small_step {
            break;
        }
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            update_inverse(&mut hinv, &s, &y, sy);
        }
    }
    Some(z)
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1/(sᵀy)`.
fn update_inverse(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let d = s.len();
    let r = 1.0 / sy;
    let hy: Vec<f64> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..d {
        for j in 0..d {
            h[i][j] += (1.0 + r * yhy) * r * s[i] * s[j] - r * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Augmented Lagrangian solve from `x0`; `None` when evaluation fails or
/// the iterates diverge.
pub(crate) fn solve_from(sub: &Subproblem, x0: &[f64], cfg: &SolverConfig) -> Option<SubSolution> {
    let n = sub.inst.n();
    let mut z = sub.lift(x0)?;
    let e0 = sub.eval(&z)?;
    let mut m = Multipliers {
        mu: vec![0.0; e0.ineq.len()],
        nu: vec![0.0; e0.eq.len()],
        rho: cfg.penalty,
    };
    let mut prev = f64::INFINITY;
    let mut e = e0;
    for _ in 0..cfg.multiplier_updates {
        z = bfgs(sub, &m, z, cfg)?;
        e = sub.eval(&z)?;
        let viol = violation(&e);
        let comp = e.ineq.iter().zip(&m.mu).map(|((g, _), mu)| (-g).min(*mu).abs()).fold(0.0, f64::max);
        for ((g, _), mu) in e.ineq.iter().zip(m.mu.iter_mut()) {
            *mu = (*mu + m.rho * g).max(0.0);
        }
        for ((h, _), nu) in e.eq.iter().zip(m.nu.iter_mut()) {
            *nu += m.rho * h;
        }
        if viol <= cfg.subproblem_tol && comp <= cfg.subproblem_tol {
            break;
        }
        if viol > 0.25 * prev {
            m.rho = (2.0 * m.rho).min(1e12);
        }
        prev = viol;
    }
    let cost = sub.inst.cost_value(&z[..n]).ok()?;
    Some(SubSolution {
        x: z[..n].to_vec(),
        cost,
        violation: violation(&e),
    })
}
