//! Exchange-method solver producing candidate minimizers for the analysis.

mod subproblem;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    evaluate_index, index_label, materialize, IndexEntry, IndexSetDescriptor, MaterializeOptions, Materialization, ModelError,
    SipInstance, Source, FEASIBILITY_TOL,
};
use subproblem::{solve_from, SubSolution, Subproblem};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid solver setting: {0}")]
    Config(String),
    #[error("no start point produced a finite subproblem solution")]
    NoCandidate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Grid indices per family in the first working set; limit points are
    /// always added.
    pub initial_working_set: usize,
    pub max_outer: usize,
    /// Stop once `sup_t g_t` and the equality residual are at most this.
    pub violation_tol: f64,
    pub multistart: usize,
    pub armijo: f64,
    /// Step shrink factor during backtracking.
    pub backtrack: f64,
    pub inner_iterations: usize,
    pub multiplier_updates: usize,
    /// Initial augmented Lagrangian penalty; doubled when violation stalls.
    pub penalty: f64,
    pub gradient_tol: f64,
    pub subproblem_tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            initial_working_set: 8,
            max_outer: 60,
            violation_tol: FEASIBILITY_TOL,
            multistart: 8,
            armijo: 1e-4,
            backtrack: 0.5,
            inner_iterations: 500,
            multiplier_updates: 60,
            penalty: 10.0,
            gradient_tol: 1e-11,
            subproblem_tol: 1e-11,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("violation_tol", self.violation_tol),
            ("penalty", self.penalty),
            ("gradient_tol", self.gradient_tol),
            ("subproblem_tol", self.subproblem_tol),
        ];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(SolverError::Config(format!("{k} must be positive, got {v}")));
        }
        let counts = [
            ("initial_working_set", self.initial_working_set),
            ("max_outer", self.max_outer),
            ("multistart", self.multistart),
            ("inner_iterations", self.inner_iterations),
            ("multiplier_updates", self.multiplier_updates),
        ];
        if let Some((k, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(SolverError::Config(format!("{k} must be positive")));
        }
        for (k, v) in [("armijo", self.armijo), ("backtrack", self.backtrack)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(SolverError::Config(format!("{k} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }

    /// Applies `key = value` settings from an instance's `[solver]` section.
    pub fn with_options(mut self, options: &[(String, String)]) -> Result<Self, SolverError> {
        for (k, v) in options {
            let bad = || SolverError::Config(format!("cannot parse `{k} = {v}`"));
            let float = || v.trim().parse::<f64>().map_err(|_| bad());
            let count = || v.trim().parse::<usize>().map_err(|_| bad());
            match k.as_str() {
                "working_set" => self.initial_working_set = count()?,
                "max_outer" | "max_iters" => self.max_outer = count()?,
                "tol" => self.violation_tol = float()?,
                "starts" => self.multistart = count()?,
                "armijo" => self.armijo = float()?,
                "backtrack" => self.backtrack = float()?,
                "inner_iterations" => self.inner_iterations = count()?,
                "multiplier_updates" => self.multiplier_updates = count()?,
                "penalty" => self.penalty = float()?,
                "gradient_tol" => self.gradient_tol = float()?,
                "subproblem_tol" => self.subproblem_tol = float()?,
                "seed" => self.seed = v.trim().parse().map_err(|_| bad())?,
                _ => return Err(SolverError::Config(format!("unknown solver key `{k}`"))),
            }
        }
        self.validate()?;
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Converged,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverIteration {
    pub iteration: usize,
    pub working_set: Vec<String>,
    pub x: Vec<f64>,
    /// `max(sup_t g_t, equality residual)` over the materialized index set.
    pub max_violation: f64,
    pub worst: Option<String>,
    pub cost: f64,
    /// The violation did not exceed that of any earlier iteration.
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub iterations: Vec<SolverIteration>,
    pub status: SolverStatus,
    pub candidate: Vec<f64>,
    pub cost: f64,
    pub max_violation: f64,
    pub config: SolverConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MostViolated {
    /// `None` without inequality constraints.
    pub label: Option<String>,
    pub violation: f64,
    pub source: Option<Source>,
    pub t: Option<f64>,
}

fn constraint_name(inst: &SipInstance, s: Source) -> &str {
    match s {
        Source::Fixed(i) => &inst.fixed[i].name,
        Source::Family(f) => &inst.families[f].name,
    }
}

/// Orders candidates: larger value first, then real indices before limit
/// points, then constraint name, then smaller parameter.
fn better(inst: &SipInstance, a: (&IndexEntry, f64), b: (&IndexEntry, f64)) -> bool {
    if a.1 != b.1 {
        return a.1 > b.1;
    }
    let key = |e: &IndexEntry| (e.is_limit(), constraint_name(inst, e.source).to_string(), e.t.unwrap_or(f64::NEG_INFINITY));
    let (ka, kb) = (key(a.0), key(b.0));
    (ka.0, &ka.1).cmp(&(kb.0, &kb.1)).then(ka.2.total_cmp(&kb.2)).is_lt()
}

/// Subdivisions on each side of an interval maximizer.
const REFINE: usize = 16;
/// Values within this of zero count as active when polishing a feasible iterate.
const POLISH_ACTIVE: f64 = 1e-6;
/// Polishing stops once a round moves no coordinate by more than this,
/// which sits above the subproblem noise floor.
const POLISH_STEP: f64 = 1e-7;
const MAX_POLISH_ROUNDS: usize = 20;

/// The largest `g_t(x)` over the materialized index set, refined once on a
/// finer grid around an interval maximizer. Ties go to the lowest constraint
/// name, then the lowest parameter.
pub fn most_violated_index(inst: &SipInstance, x: &[f64]) -> Result<MostViolated, ModelError> {
    let mat = materialize(inst, x, &MaterializeOptions::default())?;
    most_violated_in(inst, &mat)
}

fn most_violated_in(inst: &SipInstance, mat: &Materialization) -> Result<MostViolated, ModelError> {
    let mut best: Option<&IndexEntry> = None;
    for e in &mat.entries {
        if best.is_none_or(|b| better(inst, (e, e.value), (b, b.value))) {
            best = Some(e);
        }
    }
    let Some(b) = best else {
        return Ok(MostViolated {
            label: None,
            violation: f64::NEG_INFINITY,
            source: None,
            t: None,
        });
    };
    let mut out = MostViolated {
        label: Some(b.label.clone()),
        violation: b.value,
        source: Some(b.source),
        t: b.t,
    };
    if let (Source::Family(f), Some(t), false) = (b.source, b.t, b.is_limit()) {
        if let IndexSetDescriptor::Interval {
            lower,
            upper,
            include_lower,
            include_upper,
            ..
        } = inst.families[f].set
        {
            let mut ts: Vec<f64> = mat
                .entries
                .iter()
                .filter(|e| e.source == b.source && !e.is_limit())
                .filter_map(|e| e.t)
                .collect();
            ts.sort_by(f64::total_cmp);
            let k = ts.partition_point(|v| *v < t);
            let left = if k > 0 { ts[k - 1] } else { t };
            let right = ts.get(k + 1).copied().unwrap_or(t);
            let inside = |s: f64| (s > lower || (include_lower && s == lower)) && (s < upper || (include_upper && s == upper));
            let mut grid: Vec<f64> = (1..REFINE)
                .map(|i| left + (t - left) * i as f64 / REFINE as f64)
                .chain((1..REFINE).map(|i| t + (right - t) * i as f64 / REFINE as f64))
                .filter(|s| inside(*s) && *s != t)
                .collect();
            grid.sort_by(f64::total_cmp);
            for s in grid {
                let (v, _) = evaluate_index(inst, b.source, Some(s), &mat.point)?;
                if v > out.violation {
                    out.violation = v;
                    out.t = Some(s);
                    out.label = Some(index_label(inst, b.source, Some(s)));
                }
            }
        }
    }
    Ok(out)
}

/// Evenly spaced grid indices per family, every finite value up to the
/// same count, limit points and every fixed constraint.
fn initial_working_set(inst: &SipInstance, mat: &Materialization, per_family: usize) -> Vec<(Source, Option<f64>)> {
    let mut out: Vec<(Source, Option<f64>)> = (0..inst.fixed.len()).map(|i| (Source::Fixed(i), None)).collect();
    for f in 0..inst.families.len() {
        let grid: Vec<&IndexEntry> = mat
            .entries
            .iter()
            .filter(|e| e.source == Source::Family(f) && e.level == Some(0))
            .collect();
        if !grid.is_empty() {
            let count = per_family.min(grid.len());
            for k in 0..count {
                let i = if count == 1 { 0 } else { k * (grid.len() - 1) / (count - 1) };
                out.push((grid[i].source, grid[i].t));
            }
        }
        out.extend(
            mat.entries
                .iter()
                .filter(|e| e.source == Source::Family(f) && e.is_limit())
                .map(|e| (e.source, e.t)),
        );
    }
    out.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    out
}

fn working_label(inst: &SipInstance, mat: &Materialization, w: &(Source, Option<f64>)) -> String {
    mat.entries
        .iter()
        .find(|e| e.source == w.0 && e.t == w.1)
        .map(|e| e.label.clone())
        .unwrap_or_else(|| index_label(inst, w.0, w.1))
}

fn start_points(inst: &SipInstance, cfg: &SolverConfig) -> Vec<Vec<f64>> {
    let n = inst.n();
    let bounds: Vec<(f64, f64)> = inst.bounds.clone().unwrap_or_else(|| vec![(-1.0, 1.0); n]);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts = vec![bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect::<Vec<f64>>()];
    for _ in 1..cfg.multistart {
        starts.push(bounds.iter().map(|(lo, hi)| if lo < hi { rng.gen_range(*lo..=*hi) } else { *lo }).collect());
    }
    starts
}

/// Feasible (to `tol`) beats infeasible; then lower cost; then lower
/// violation; then lexicographically smaller point.
fn pick(best: Option<SubSolution>, cand: SubSolution, tol: f64) -> SubSolution {
    let Some(b) = best else { return cand };
    let (fb, fc) = (b.violation <= tol, cand.violation <= tol);
    if fb != fc {
        return if fc { cand } else { b };
    }
    let key_cmp = if fc {
        let scale = 1e-12 * (1.0 + b.cost.abs());
        if (cand.cost - b.cost).abs() > scale {
            cand.cost.total_cmp(&b.cost)
        } else {
            std::cmp::Ordering::Equal
        }
    } else {
        cand.violation.total_cmp(&b.violation)
    };
    let ord = key_cmp.then_with(|| {
        cand.x
            .iter()
            .zip(&b.x)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if ord.is_lt() {
        cand
    } else {
        b
    }
}

/// Exchange method: solve over a finite working set from every start, add
/// the most violated index, repeat until the point is feasible to
/// `violation_tol` or `max_outer` rounds have run.
pub fn solve(inst: &SipInstance, cfg: &SolverConfig) -> Result<(Vec<f64>, SolverTrace), SolverError> {
    cfg.validate()?;
    inst.validate()?;
    let starts = start_points(inst, cfg);
    let mat0 = materialize(inst, &starts[0], &MaterializeOptions::default())?;
    let mut working = initial_working_set(inst, &mat0, cfg.initial_working_set);
    let mut local = cfg.clone();
    let mut iterations: Vec<SolverIteration> = Vec::new();
    let mut previous: Option<Vec<f64>> = None;
    let mut best_violation = f64::INFINITY;
    // polishing rounds restart from the previous iterate only
    let mut polishing = false;
    let mut polish_rounds = 0;
    for it in 0..cfg.max_outer {
        let sub = Subproblem { inst, working: &working };
        let mut best: Option<SubSolution> = None;
        let fresh: &[Vec<f64>] = if polishing { &[] } else { &starts };
        for s in previous.iter().chain(fresh) {
            if let Some(sol) = solve_from(&sub, s, &local) {
                best = Some(pick(best, sol, local.subproblem_tol.max(cfg.violation_tol * 0.1)));
            }
        }
        let Some(sol) = best else { return Err(SolverError::NoCandidate) };
        let mat = materialize(inst, &sol.x, &MaterializeOptions::default())?;
        let worst = most_violated_in(inst, &mat)?;
        let eq = inst.equality_residual(&sol.x)?;
        let violation = worst.violation.max(eq).max(0.0);
        let accepted = violation <= best_violation;
        best_violation = best_violation.min(violation);
        iterations.push(SolverIteration {
            iteration: it,
            working_set: working.iter().map(|w| working_label(inst, &mat, w)).collect(),
            x: sol.x.clone(),
            max_violation: violation,
            worst: worst.label.clone(),
            cost: sol.cost,
            accepted,
        });
        // once feasible, keep exchanging a nearly active interval index
        // until the iterate stops moving
        let moved = previous.as_ref().is_none_or(|p| {
            p.iter().zip(&sol.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > POLISH_STEP
        });
        let polish = match worst.source {
            Some(s @ Source::Family(_)) => {
                moved && polish_rounds < MAX_POLISH_ROUNDS && worst.violation >= -POLISH_ACTIVE && it + 1 < cfg.max_outer && !working.contains(&(s, worst.t))
            }
            _ => false,
        };
        if violation <= cfg.violation_tol && polish {
            working.push((worst.source.unwrap(), worst.t));
            previous = Some(sol.x);
            polishing = true;
            polish_rounds += 1;
            continue;
        }
        if violation <= cfg.violation_tol {
            return Ok((
                sol.x.clone(),
                SolverTrace {
                    iterations,
                    status: SolverStatus::Converged,
                    candidate: sol.x,
                    cost: sol.cost,
                    max_violation: violation,
                    config: cfg.clone(),
                },
            ));
        }
        match (worst.source, worst.violation > cfg.violation_tol) {
            (Some(s), true) if !working.contains(&(s, worst.t)) => working.push((s, worst.t)),
            // the subproblem left a working constraint or an equality
            // violated: tighten it instead
            _ => {
                local.subproblem_tol = (local.subproblem_tol * 1e-2).max(1e-15);
                local.multiplier_updates = (local.multiplier_updates * 2).min(1000);
            }
        }
        previous = Some(sol.x);
    }
    let last = iterations.last().cloned().expect("max_outer is positive");
    Ok((
        last.x.clone(),
        SolverTrace {
            status: SolverStatus::IterationLimit,
            candidate: last.x,
            cost: last.cost,
            max_violation: last.max_violation,
            iterations,
            config: cfg.clone(),
        },
    ))
}

#[cfg(test)]
mod tests;
