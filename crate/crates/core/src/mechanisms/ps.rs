//! Probabilistic Serial: simultaneous eating at unit speed, simulated event by event.

use super::rsd::rankings;
use crate::model::{FractionalAssignment, Instance, Matrix};

const EMPTY: f64 = 1e-15;

pub fn ps_run(inst: &Instance) -> FractionalAssignment {
    let (n, m) = (inst.n_agents(), inst.n_items());
    let ranks = rankings(inst);
    let mut left: Vec<f64> = inst.supplies().to_vec();
    let mut p = Matrix::zeros(n, m);
    let mut t: f64 = 0.0;
    loop {
        let eating: Vec<Option<usize>> =
            ranks.iter().map(|r| r.iter().copied().find(|&j| left[j] > EMPTY)).collect();
        let mut rate = vec![0usize; m];
        for j in eating.iter().flatten() {
            rate[*j] += 1;
        }
        if rate.iter().all(|&r| r == 0) || t >= 1.0 {
            break;
        }
        let mut dt = 1.0 - t;
        for j in 0..m {
            if rate[j] > 0 {
                dt = dt.min(left[j] / rate[j] as f64);
            }
        }
        for (i, e) in eating.iter().enumerate() {
            if let Some(j) = e {
                p[(i, *j)] += dt;
            }
        }
        for j in 0..m {
            if rate[j] > 0 {
                left[j] -= dt * rate[j] as f64;
                if left[j] <= EMPTY {
                    left[j] = 0.0;
                }
            }
        }
        t += dt;
        if 1.0 - t <= EMPTY {
            break;
        }
    }
    FractionalAssignment::from_matrix(p)
}
