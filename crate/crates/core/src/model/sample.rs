//! A fixed, thinned index set for repeated evaluation away from the point
//! it was materialized at.

use crate::expr::{eval, Bindings};

use super::{evaluate_index, Materialization, SipInstance, Source};

#[derive(Clone, Debug)]
pub struct IndexSample<'a> {
    inst: &'a SipInstance,
    pub indices: Vec<(Source, Option<f64>)>,
}

impl<'a> IndexSample<'a> {
    /// Analysis-resolution entries plus closure points. Grid entries of each
    /// family are thinned to about `per_family`; approach and limit points
    /// are always kept.
    pub fn new(inst: &'a SipInstance, mat: &Materialization, per_family: usize) -> Self {
        let res = mat.analysis_resolution();
        let mut indices = Vec::new();
        let mut grid: Vec<Vec<(Source, Option<f64>)>> = vec![Vec::new(); inst.families.len()];
        for e in mat.entries.iter().filter(|e| e.included(res) || e.is_limit()) {
            match e.source {
                Source::Family(f) if e.level.is_some() => grid[f].push((e.source, e.t)),
                _ => indices.push((e.source, e.t)),
            }
        }
        for list in grid {
            let step = list.len().div_ceil(per_family.max(1)).max(1);
            indices.extend(list.iter().step_by(step));
            if list.len() > 1 && (list.len() - 1) % step != 0 {
                indices.push(list[list.len() - 1]);
            }
        }
        IndexSample { inst, indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn value(&self, src: Source, t: Option<f64>, x: &[f64]) -> Option<f64> {
        let v = match src {
            Source::Fixed(i) => eval(&self.inst.fixed[i].body, &Bindings::new(x)),
            Source::Family(f) => {
                let fam = &self.inst.families[f];
                let idx = [(fam.index.as_str(), t?)];
                eval(&fam.body, &Bindings::with_index(x, &idx))
            }
        };
        v.ok().filter(|v| v.is_finite())
    }

    /// Largest sampled constraint value; `+inf` if any evaluation fails.
    pub fn max_value(&self, x: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for &(s, t) in &self.indices {
            match self.value(s, t, x) {
                Some(v) => best = best.max(v),
                None => return f64::INFINITY,
            }
        }
        best
    }

    /// Largest sampled value with the gradient of a maximizer. The gradient
    /// is zero when the sample is empty or an evaluation fails.
    pub fn max_with_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut best = (f64::NEG_INFINITY, vec![0.0; x.len()]);
        let mut arg = None;
        for (k, &(s, t)) in self.indices.iter().enumerate() {
            match self.value(s, t, x) {
                Some(v) if v > best.0 => {
                    best.0 = v;
                    arg = Some(k);
                }
                Some(_) => {}
                None => return (f64::INFINITY, vec![0.0; x.len()]),
            }
        }
        if let Some(k) = arg {
            let (s, t) = self.indices[k];
            if let Ok((_, g)) = evaluate_index(self.inst, s, t, x) {
                best.1 = g;
            }
        }
        best
    }
}
