//! Least squares and nonnegative least squares on column lists.

use super::matrix::{dot, norm2, orthonormalize};

/// `argmin ‖Σ z_j c_j − b‖₂` for linearly independent columns; `None` when
/// the columns are (numerically) dependent.
pub fn least_squares(columns: &[&[f64]], b: &[f64]) -> Option<Vec<f64>> {
    let k = columns.len();
    if k == 0 {
        return Some(vec![]);
    }
    // modified Gram-Schmidt QR
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut r = vec![vec![0.0; k]; k];
    for (j, c) in columns.iter().enumerate() {
        let scale = norm2(c);
        let mut w = c.to_vec();
        for (i, qi) in q.iter().enumerate() {
            let p = dot(&w, qi);
            r[i][j] += p;
            for (wv, qv) in w.iter_mut().zip(qi) {
                *wv -= p * qv;
            }
        }
        let nw = norm2(&w);
        if scale == 0.0 || nw <= 1e-12 * scale {
            return None;
        }
        r[j][j] = nw;
        q.push(w.into_iter().map(|v| v / nw).collect());
    }
    let qb: Vec<f64> = q.iter().map(|qi| dot(qi, b)).collect();
    let mut z = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| r[i][j] * z[j]).sum();
        z[i] = (qb[i] - s) / r[i][i];
    }
    Some(z)
}

/// Projects `v` and every column onto the orthogonal complement of `span(h)`.
pub(crate) fn deflate(h: &[Vec<f64>], vectors: &mut [Vec<f64>]) {
    let basis = orthonormalize(h, 1e-10);
    for v in vectors.iter_mut() {
        for b in &basis {
            let c = dot(v, b);
            for (x, bx) in v.iter_mut().zip(b) {
                *x -= c * bx;
            }
        }
    }
}

/// Lawson-Hanson nonnegative least squares: `argmin_{λ>=0} ‖Σ λ_j g_j − v‖₂`.
pub fn nnls(g: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let k = g.len();
    let mut lambda = vec![0.0; k];
    if k == 0 {
        return lambda;
    }
    let gscale = g.iter().map(|c| norm2(c)).fold(0.0, f64::max);
    let wtol = 1e-13 * gscale.max(1e-300) * norm2(v).max(1e-300);
    let mut passive: Vec<usize> = Vec::new();
    let mut blocked = vec![false; k];
    let residual = |lambda: &[f64]| -> Vec<f64> {
        let mut r = v.to_vec();
        for (j, l) in lambda.iter().enumerate() {
            if *l != 0.0 {
                for (ri, gi) in r.iter_mut().zip(&g[j]) {
                    *ri -= l * gi;
                }
            }
        }
        r
    };
    for _ in 0..(3 * k + 30) {
        let r = residual(&lambda);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..k {
            if passive.contains(&j) || blocked[j] {
                continue;
            }
            let w = dot(&g[j], &r);
            if w > wtol && best.is_none_or(|(_, bw)| w > bw) {
                best = Some((j, w));
            }
        }
        let Some((j, _)) = best else { break };
        passive.push(j);
        let mut guard = 0;
        loop {
            guard += 1;
            let cols: Vec<&[f64]> = passive.iter().map(|&i| g[i].as_slice()).collect();
            let Some(z) = least_squares(&cols, v) else {
                // dependent column: drop it and never try it again
                passive.pop();
                blocked[j] = true;
                break;
            };
            if z.iter().all(|zi| *zi > 0.0) {
                for (p, zi) in passive.iter().zip(&z) {
                    lambda[*p] = *zi;
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (p, zi) in passive.iter().zip(&z) {
                if *zi <= 0.0 {
                    let l = lambda[*p];
                    alpha = alpha.min(l / (l - zi));
                }
            }
            for (p, zi) in passive.iter().zip(&z) {
                lambda[*p] += alpha * (zi - lambda[*p]);
            }
            passive.retain(|&p| {
                if lambda[p] <= 1e-15 {
                    lambda[p] = 0.0;
                    false
                } else {
                    true
                }
            });
            if passive.is_empty() || guard > 3 * k + 30 {
                break;
            }
        }
    }
    lambda
}
