//! Active-set Newton refinement: fix the support and tight constraints guessed from the barrier
//! iterate, then solve the stationarity system exactly.

use nalgebra::{DMatrix, DVector};

use super::barrier::BarrierOut;
use super::{NswOptions, Reduced};
use crate::error::Result;

const SUPPORT_TOL: f64 = 1e-9;

pub(crate) struct Candidate {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub q: Vec<f64>,
}

/// KKT residual on the reduced problem (values already divided by surplus inside).
fn residual(red: &Reduced, c: &Candidate) -> f64 {
    let (na, nm) = (red.na(), red.nm());
    let s = red.surplus(&c.x);
    if s.iter().any(|&s| !(s > 0.0)) {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    let mut col = vec![0.0; nm];
    for a in 0..na {
        let mut row = 0.0;
        for k in 0..nm {
            let idx = a * nm + k;
            let x = c.x[idx];
            if x < -SUPPORT_TOL {
                return f64::INFINITY;
            }
            row += x;
            col[k] += x;
            let gap = red.w[idx] / s[a] - c.t[k] - c.q[a];
            worst = worst.max(if x > SUPPORT_TOL { gap.abs() } else { gap });
        }
        if row > red.budget[a] + SUPPORT_TOL {
            return f64::INFINITY;
        }
        worst = worst.max(-c.q[a]).max(c.q[a].abs() * (red.budget[a] - row).abs());
    }
    for k in 0..nm {
        if col[k] > red.supply[k] + SUPPORT_TOL {
            return f64::INFINITY;
        }
        worst = worst.max(-c.t[k]).max(c.t[k].abs() * (red.supply[k] - col[k]).abs());
    }
    worst
}

/// `threshold = None` splits support by `x > mu / x`; otherwise by `x > threshold`.
fn active_set_newton(
    red: &Reduced,
    bar: &BarrierOut,
    threshold: Option<f64>,
    iterations: &mut usize,
) -> Option<Candidate> {
    let (na, nm) = (red.na(), red.nm());
    let nv = na * nm;
    let mut r_slack = red.budget.clone();
    let mut c_slack = red.supply.clone();
    for a in 0..na {
        for k in 0..nm {
            r_slack[a] -= bar.x[a * nm + k];
            c_slack[k] -= bar.x[a * nm + k];
        }
    }
    let big = |v: f64| match threshold {
        None => v * v > bar.mu,
        Some(th) => v > th,
    };
    let support: Vec<usize> = (0..nv).filter(|&i| big(bar.x[i])).collect();
    let rows: Vec<usize> = (0..na).filter(|&a| !big(r_slack[a])).collect();
    let cols: Vec<usize> = (0..nm).filter(|&k| !big(c_slack[k])).collect();
    let mut row_pos = vec![None; na];
    for (p, &a) in rows.iter().enumerate() {
        row_pos[a] = Some(p);
    }
    let mut col_pos = vec![None; nm];
    for (p, &k) in cols.iter().enumerate() {
        col_pos[k] = Some(p);
    }
    let ns = support.len();
    let nu = ns + cols.len() + rows.len();
    let mut y = DVector::<f64>::zeros(nu);
    for (p, &idx) in support.iter().enumerate() {
        y[p] = bar.x[idx];
    }
    for (p, &k) in cols.iter().enumerate() {
        y[ns + p] = bar.t[k];
    }
    for (p, &a) in rows.iter().enumerate() {
        y[ns + cols.len() + p] = bar.q[a];
    }
    let expand = |y: &DVector<f64>| {
        let mut x = vec![0.0; nv];
        for (p, &idx) in support.iter().enumerate() {
            x[idx] = y[p];
        }
        x
    };
    let eval = |y: &DVector<f64>| -> Option<(DVector<f64>, Vec<f64>)> {
        let x = expand(y);
        let s = red.surplus(&x);
        if s.iter().any(|&s| !(s > 0.0)) {
            return None;
        }
        let mut f = DVector::<f64>::zeros(nu);
        for (e, &idx) in support.iter().enumerate() {
            let (a, k) = (idx / nm, idx % nm);
            let mut v = red.w[idx] / s[a];
            if let Some(p) = col_pos[k] {
                v -= y[ns + p];
            }
            if let Some(p) = row_pos[a] {
                v -= y[ns + cols.len() + p];
            }
            f[e] = v;
        }
        for (p, &k) in cols.iter().enumerate() {
            f[ns + p] = -red.supply[k];
        }
        for (p, &a) in rows.iter().enumerate() {
            f[ns + cols.len() + p] = -red.budget[a];
        }
        for (e, &idx) in support.iter().enumerate() {
            let (a, k) = (idx / nm, idx % nm);
            if let Some(p) = col_pos[k] {
                f[ns + p] += y[e];
            }
            if let Some(p) = row_pos[a] {
                f[ns + cols.len() + p] += y[e];
            }
        }
        Some((f, s))
    };
    let (mut f, mut s) = eval(&y)?;
    for _ in 0..40 {
        let norm = f.amax();
        if norm < 1e-15 {
            break;
        }
        *iterations += 1;
        let mut j = DMatrix::<f64>::zeros(nu, nu);
        for (e, &idx) in support.iter().enumerate() {
            let (a, k) = (idx / nm, idx % nm);
            let s2 = s[a] * s[a];
            for (e2, &idx2) in support.iter().enumerate() {
                if idx2 / nm == a {
                    j[(e, e2)] = -red.w[idx] * red.w[idx2] / s2;
                }
            }
            if let Some(p) = col_pos[k] {
                j[(e, ns + p)] = -1.0;
                j[(ns + p, e)] = 1.0;
            }
            if let Some(p) = row_pos[a] {
                j[(e, ns + cols.len() + p)] = -1.0;
                j[(ns + cols.len() + p, e)] = 1.0;
            }
        }
        let svd = j.svd(true, true);
        let cutoff = 1e-12 * svd.singular_values.max();
        let step = svd.solve(&(-&f), cutoff).ok()?;
        let mut alpha = 1.0;
        let mut next = None;
        for _ in 0..30 {
            let trial = &y + alpha * &step;
            if let Some((f2, s2)) = eval(&trial) {
                if f2.amax() < norm || alpha < 1e-6 {
                    next = Some((trial, f2, s2));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let (ny, nf, ns2) = next?;
        let improved = nf.amax() < 0.5 * norm;
        y = ny;
        f = nf;
        s = ns2;
        if !improved && f.amax() < 1e-12 {
            break;
        }
    }
    let mut x = expand(&y);
    for v in x.iter_mut() {
        if *v < 0.0 && *v > -SUPPORT_TOL {
            *v = 0.0;
        }
    }
    let mut t = vec![0.0; nm];
    for (p, &k) in cols.iter().enumerate() {
        t[k] = y[ns + p];
    }
    let mut q = vec![0.0; na];
    for (p, &a) in rows.iter().enumerate() {
        q[a] = y[ns + cols.len() + p];
    }
    Some(Candidate { x, t, q })
}

/// Candidate points, most promising first: polished points for several support guesses, then the
/// raw barrier iterate. Duals attached to a candidate may be poor; the caller can refit them.
pub(crate) fn refine(red: &Reduced, bar: &BarrierOut, _opts: &NswOptions, iterations: &mut usize) -> Result<Vec<Candidate>> {
    let raw = Candidate { x: bar.x.clone(), t: bar.t.clone(), q: bar.q.clone() };
    let raw_res = residual(red, &raw);
    let guesses = [None, Some(1e-5), Some(1e-4), Some(1e-6), Some(1e-3)];
    let mut scored: Vec<(f64, Candidate)> = Vec::new();
    for g in guesses {
        if let Some(c) = active_set_newton(red, bar, g, iterations) {
            let r = residual(red, &c);
            if r.is_finite() && !scored.iter().any(|(_, o)| o.x == c.x) {
                scored.push((r, c));
            }
        }
        if scored.iter().any(|(r, _)| *r <= 1e-12) {
            break;
        }
    }
    scored.push((raw_res, raw));
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(scored.into_iter().map(|(_, c)| c).collect())
}
