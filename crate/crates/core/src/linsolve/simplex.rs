//! Dense two-phase tableau simplex; Bland's rule guards against cycling.

use super::{LinsolveError, Matrix};

/// minimize `c·x` subject to `A x = b`, `lower <= x <= upper`.
///
/// Bounds may be infinite.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub a_eq: Matrix,
    pub b_eq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// All variables nonnegative and unbounded above.
    pub fn nonnegative(objective: Vec<f64>, a_eq: Matrix, b_eq: Vec<f64>) -> Self {
        let n = objective.len();
        LpProblem {
            objective,
            a_eq,
            b_eq,
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers of the equality rows, `y = c_B B^{-1}`; only meaningful
    /// when `status` is `Optimal`.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

const COST_TOL: f64 = 1e-10;
const PIV_TOL: f64 = 1e-11;
/// Consecutive degenerate pivots tolerated before Bland's rule takes over.
const DEGENERATE_RUN: usize = 20;

/// How an original variable maps onto nonnegative standard-form columns:
/// `x = offset + Σ coef * z[col]`.
struct VarMap {
    offset: f64,
    parts: Vec<(usize, f64)>,
}

struct Tableau {
    rows: usize,
    width: usize, // structural + artificial columns, rhs stored separately
    a: Vec<f64>,
    rhs: Vec<f64>,
    cost: Vec<f64>, // reduced costs
    obj: f64,       // -(current objective)
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.width + j]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.a[r * w + c];
        for k in 0..w {
            self.a[r * w + k] /= p;
        }
        self.rhs[r] /= p;
        self.a[r * w + c] = 1.0;
        let (prow, prhs) = (self.a[r * w..(r + 1) * w].to_vec(), self.rhs[r]);
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.a[i * w + c];
            if f != 0.0 {
                let row = &mut self.a[i * w..(i + 1) * w];
                for (x, pk) in row.iter_mut().zip(&prow) {
                    *x -= f * pk;
                }
                row[c] = 0.0;
                self.rhs[i] -= f * prhs;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (x, pk) in self.cost.iter_mut().zip(&prow) {
                *x -= f * pk;
            }
            self.cost[c] = 0.0;
            self.obj -= f * prhs;
        }
        self.basis[r] = c;
    }

    /// Pivots over columns `< allowed` until optimal; returns false when
    /// unbounded. Entering columns follow Dantzig's rule, switching to
    /// Bland's rule after a run of degenerate pivots.
    fn run(&mut self, allowed: usize, iters: &mut usize, limit: usize) -> Result<bool, LinsolveError> {
        let mut degenerate = 0usize;
        loop {
            let scale = self.cost[..allowed].iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let thresh = -COST_TOL * scale;
            let entering = if degenerate > DEGENERATE_RUN {
                (0..allowed).find(|&j| self.cost[j] < thresh)
            } else {
                (0..allowed)
                    .filter(|&j| self.cost[j] < thresh)
                    .min_by(|&a, &b| self.cost[a].total_cmp(&self.cost[b]))
            };
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let aic = self.at(i, c);
                if aic > PIV_TOL {
                    let ratio = self.rhs[i].max(0.0) / aic;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            let tie = (ratio - lr).abs() <= 1e-12 * lr.abs().max(1.0);
                            if ratio < lr && !tie || tie && self.basis[i] < self.basis[li] {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(false);
            };
            if ratio <= 0.0 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            *iters += 1;
            if *iters > limit {
                return Err(LinsolveError::IterationLimit(limit));
            }
            self.pivot(r, c);
        }
    }
}

/// Solves an [`LpProblem`].
///
/// Infeasibility and unboundedness are reported through [`LpStatus`];
/// malformed input and iteration exhaustion are errors.
pub fn simplex_solve(p: &LpProblem) -> Result<LpSolution, LinsolveError> {
    let n = p.objective.len();
    let m = p.a_eq.rows();
    if p.a_eq.cols() != n || p.b_eq.len() != m || p.lower.len() != n || p.upper.len() != n {
        return Err(LinsolveError::Dimension(format!(
            "A is {}x{}, c has {}, b has {}, bounds have {}/{}",
            m,
            p.a_eq.cols(),
            n,
            p.b_eq.len(),
            p.lower.len(),
            p.upper.len()
        )));
    }
    if !p.a_eq.is_finite() || p.objective.iter().chain(&p.b_eq).any(|v| !v.is_finite()) {
        return Err(LinsolveError::NonFinite);
    }
    for j in 0..n {
        let (l, u) = (p.lower[j], p.upper[j]);
        if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
            return Err(LinsolveError::BadBounds { index: j, lower: l, upper: u });
        }
    }

    // standard form columns
    let mut maps = Vec::with_capacity(n);
    let mut nz = 0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new(); // (z column, range)
    for j in 0..n {
        let (l, u) = (p.lower[j], p.upper[j]);
        let map = match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                bound_rows.push((nz, u - l));
                VarMap { offset: l, parts: vec![(nz, 1.0)] }
            }
            (true, false) => VarMap { offset: l, parts: vec![(nz, 1.0)] },
            (false, true) => VarMap { offset: u, parts: vec![(nz, -1.0)] },
            (false, false) => {
                nz += 1;
                VarMap { offset: 0.0, parts: vec![(nz - 1, 1.0), (nz, -1.0)] }
            }
        };
        nz += 1;
        maps.push(map);
    }
    // slack for every bound row
    let slack0 = nz;
    let ns = nz + bound_rows.len();
    let rows = m + bound_rows.len();
    let width = ns + rows;

    let mut a = vec![0.0; rows * width];
    let mut rhs = vec![0.0; rows];
    let mut cz = vec![0.0; width];
    for j in 0..n {
        for &(col, coef) in &maps[j].parts {
            cz[col] += p.objective[j] * coef;
        }
    }
    for i in 0..m {
        let mut b = p.b_eq[i];
        for j in 0..n {
            let aij = p.a_eq[(i, j)];
            if aij == 0.0 {
                continue;
            }
            b -= aij * maps[j].offset;
            for &(col, coef) in &maps[j].parts {
                a[i * width + col] += aij * coef;
            }
        }
        rhs[i] = b;
    }
    for (k, &(col, range)) in bound_rows.iter().enumerate() {
        let i = m + k;
        a[i * width + col] = 1.0;
        a[i * width + slack0 + k] = 1.0;
        rhs[i] = range;
    }
    let mut flip = vec![1.0; rows];
    for i in 0..rows {
        if rhs[i] < 0.0 {
            flip[i] = -1.0;
            rhs[i] = -rhs[i];
            for k in 0..ns {
                a[i * width + k] = -a[i * width + k];
            }
        }
        a[i * width + ns + i] = 1.0;
    }

    // phase 1: minimize the sum of artificials
    let mut cost = vec![0.0; width];
    let mut obj = 0.0;
    for i in 0..rows {
        for k in 0..ns {
            cost[k] -= a[i * width + k];
        }
        obj -= rhs[i];
    }
    let mut t = Tableau {
        rows,
        width,
        a,
        rhs,
        cost,
        obj,
        basis: (ns..ns + rows).collect(),
    };
    let limit = 50 * (rows + width).max(200);
    let mut iters = 0;
    t.run(ns, &mut iters, limit)?;
    let bscale = t.rhs.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    if -t.obj > 1e-9 * bscale {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![f64::NAN; n],
            objective: f64::NAN,
            duals: vec![f64::NAN; m],
            iterations: iters,
        });
    }
    // drive remaining artificials out where possible
    for i in 0..rows {
        if t.basis[i] >= ns {
            if let Some(c) = (0..ns).find(|&k| t.at(i, k).abs() > 1e-9) {
                t.pivot(i, c);
            }
        }
    }

    // phase 2
    t.cost = vec![0.0; width];
    t.cost[..ns].copy_from_slice(&cz[..ns]);
    t.obj = 0.0;
    for i in 0..rows {
        let cb = t.cost[t.basis[i]];
        if cb != 0.0 {
            for k in 0..width {
                t.cost[k] -= cb * t.a[i * width + k];
            }
            t.obj -= cb * t.rhs[i];
        }
    }
    for i in 0..rows {
        t.cost[t.basis[i]] = 0.0;
    }
    let bounded = t.run(ns, &mut iters, limit)?;

    let mut z = vec![0.0; ns];
    for i in 0..rows {
        if t.basis[i] < ns {
            z[t.basis[i]] = t.rhs[i];
        }
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|mp| mp.offset + mp.parts.iter().map(|&(c, k)| k * z[c]).sum::<f64>())
        .collect();
    let objective = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
    // reduced cost of artificial i is -y'_i
    let duals = (0..m).map(|i| -t.cost[ns + i] * flip[i]).collect();
    Ok(LpSolution {
        status: if bounded { LpStatus::Optimal } else { LpStatus::Unbounded },
        x,
        objective: if bounded { objective } else { f64::NEG_INFINITY },
        duals,
        iterations: iters,
    })
}
