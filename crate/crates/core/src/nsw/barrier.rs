//! Primal log-barrier Newton method on the reduced problem.

use nalgebra::{DMatrix, DVector};

use super::{NswOptions, Reduced, TraceRow};
use crate::error::{Error, Result};

const MU_START: f64 = 1.0;
const MU_FACTOR: f64 = 0.1;
const MU_END: f64 = 1e-13;
const INNER_MAX: usize = 80;

pub(crate) struct BarrierOut {
    pub x: Vec<f64>,
    pub mu: f64,
    pub t: Vec<f64>,
    pub q: Vec<f64>,
    pub iterations: usize,
}

struct Slacks {
    s: Vec<f64>,
    r: Vec<f64>,
    c: Vec<f64>,
}

fn slacks(red: &Reduced, x: &[f64]) -> Slacks {
    let (na, nm) = (red.na(), red.nm());
    let s = red.surplus(x);
    let mut r = red.budget.clone();
    let mut c = red.supply.clone();
    for a in 0..na {
        for k in 0..nm {
            r[a] -= x[a * nm + k];
            c[k] -= x[a * nm + k];
        }
    }
    Slacks { s, r, c }
}

fn barrier_value(red: &Reduced, x: &[f64], mu: f64) -> f64 {
    let sl = slacks(red, x);
    if sl.s.iter().chain(&sl.r).chain(&sl.c).chain(x).any(|&v| !(v > 0.0)) {
        return f64::INFINITY;
    }
    let ln_sum = |v: &[f64]| v.iter().map(|y| y.ln()).sum::<f64>();
    -ln_sum(&sl.s) - mu * (ln_sum(x) + ln_sum(&sl.r) + ln_sum(&sl.c))
}

/// Largest step keeping every slack positive.
fn max_step(red: &Reduced, x: &[f64], d: &[f64]) -> f64 {
    let (na, nm) = (red.na(), red.nm());
    let sl = slacks(red, x);
    let mut ds = vec![0.0; na];
    let mut dr = vec![0.0; na];
    let mut dc = vec![0.0; nm];
    for a in 0..na {
        for k in 0..nm {
            let v = d[a * nm + k];
            ds[a] += red.w[a * nm + k] * v;
            dr[a] -= v;
            dc[k] -= v;
        }
    }
    let mut alpha = f64::INFINITY;
    let mut consider = |val: f64, dir: f64| {
        if dir < 0.0 {
            alpha = alpha.min(-val / dir);
        }
    };
    for (v, dv) in x.iter().zip(d) {
        consider(*v, *dv);
    }
    for a in 0..na {
        consider(sl.s[a], ds[a]);
        consider(sl.r[a], dr[a]);
    }
    for k in 0..nm {
        consider(sl.c[k], dc[k]);
    }
    alpha
}

pub(crate) fn run(red: &Reduced, mut x: Vec<f64>, opts: &NswOptions, trace: &mut Vec<TraceRow>) -> Result<BarrierOut> {
    let (na, nm) = (red.na(), red.nm());
    let nv = na * nm;
    let n_terms = (nv + na + nm) as f64;
    let mut mu = MU_START;
    let mut iterations = 0;
    loop {
        for _ in 0..INNER_MAX {
            if iterations >= opts.max_iterations {
                return Err(Error::NoConvergence { iterations, best_residual: mu * n_terms });
            }
            iterations += 1;
            let sl = slacks(red, &x);
            let mut g = DVector::<f64>::zeros(nv);
            let mut h = DMatrix::<f64>::zeros(nv, nv);
            for a in 0..na {
                let inv_s = 1.0 / sl.s[a];
                let inv_r2 = mu / (sl.r[a] * sl.r[a]);
                for k in 0..nm {
                    let idx = a * nm + k;
                    g[idx] = -red.w[idx] * inv_s - mu / x[idx] + mu / sl.r[a] + mu / sl.c[k];
                    h[(idx, idx)] += mu / (x[idx] * x[idx]);
                    for l in 0..nm {
                        let jdx = a * nm + l;
                        h[(idx, jdx)] += red.w[idx] * red.w[jdx] * inv_s * inv_s + inv_r2;
                    }
                }
            }
            for k in 0..nm {
                let inv_c2 = mu / (sl.c[k] * sl.c[k]);
                for a in 0..na {
                    for b in 0..na {
                        h[(a * nm + k, b * nm + k)] += inv_c2;
                    }
                }
            }
            let d = match h.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    let scale = (0..nv).map(|i| h[(i, i)]).fold(0.0, f64::max);
                    let mut hr = h;
                    for i in 0..nv {
                        hr[(i, i)] += 1e-12 * scale.max(1.0);
                    }
                    match hr.cholesky() {
                        Some(ch) => ch.solve(&(-&g)),
                        None => break,
                    }
                }
            };
            let dec = -g.dot(&d);
            if !(dec > 1e-13) {
                break;
            }
            let dv: Vec<f64> = d.iter().copied().collect();
            let f0 = barrier_value(red, &x, mu);
            let mut alpha = (0.99 * max_step(red, &x, &dv)).min(1.0);
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(&dv).map(|(x, d)| x + alpha * d).collect();
                let f1 = barrier_value(red, &trial, mu);
                if f1 <= f0 - 0.25 * alpha * dec {
                    x = trial;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted || dec < 1e-11 {
                break;
            }
        }
        if opts.trace {
            let sl = slacks(red, &x);
            trace.push(TraceRow {
                iteration: iterations,
                objective: sl.s.iter().map(|s| s.ln()).sum::<f64>() + red.log_scale,
                residual: mu * n_terms,
            });
        }
        if mu <= MU_END {
            break;
        }
        mu *= MU_FACTOR;
    }
    let sl = slacks(red, &x);
    Ok(BarrierOut {
        t: sl.c.iter().map(|c| mu / c).collect(),
        q: sl.r.iter().map(|r| mu / r).collect(),
        x,
        mu,
        iterations,
    })
}
