//! Randomized Partial Improvement: PA at half scale on a random half, padded with the uniform
//! outside option, then recursion on the rest with the leftover supply.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pa::{pa_run_agents, PaOutcome};
use crate::error::{Error, Result};
use crate::model::{DisagreementPoint, FractionalAssignment, Instance, Matrix};
use crate::nsw::DEFAULT_SOLVER_TOL;

/// Default recursion cutoff.
pub const DEFAULT_N0: usize = 4;

/// Supply below this (in absolute terms) means the feasibility argument broke.
const UNDERFLOW_TOL: f64 = 1e-8;

/// State of one recursion level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RpiState {
    pub depth: usize,
    pub remaining: Vec<usize>,
    pub supplies: Vec<f64>,
    pub n0: usize,
    pub seed: u64,
    /// Agents sampled at this level (empty for the base case).
    pub sampled: Vec<usize>,
    /// PA fractions of the sampled agents, in `sampled` order.
    pub fractions: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RpiOutcome {
    pub assignment: FractionalAssignment,
    pub levels: Vec<RpiState>,
}

/// Sample `k` of `agents` by partial Fisher-Yates under `seed ^ depth`.
pub fn sample_agents(agents: &[usize], k: usize, seed: u64, depth: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ depth as u64);
    let mut pool = agents.to_vec();
    let n = pool.len();
    for i in 0..k.min(n) {
        let j = i + rng.gen_range(0..n - i);
        pool.swap(i, j);
    }
    let mut out = pool[..k.min(n)].to_vec();
    out.sort_unstable();
    out
}

/// Memo of PA runs keyed by sampled set and level supplies, for many seeds on one instance.
#[derive(Default)]
pub struct RpiCache {
    runs: HashMap<(Vec<usize>, Vec<u64>), PaOutcome>,
}

impl RpiCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }
}

pub fn rpi_run(inst: &Instance, n0: usize, seed: u64) -> Result<FractionalAssignment> {
    Ok(rpi_run_detailed(inst, n0, seed, DEFAULT_SOLVER_TOL)?.assignment)
}

pub fn rpi_run_detailed(inst: &Instance, n0: usize, seed: u64, tol: f64) -> Result<RpiOutcome> {
    run(inst, n0, seed, tol, None)
}

/// As [`rpi_run_detailed`], reusing PA runs from `cache`. The cache must only be used with one instance.
pub fn rpi_run_cached(inst: &Instance, n0: usize, seed: u64, tol: f64, cache: &mut RpiCache) -> Result<RpiOutcome> {
    run(inst, n0, seed, tol, Some(cache))
}

fn run(inst: &Instance, n0: usize, seed: u64, tol: f64, mut cache: Option<&mut RpiCache>) -> Result<RpiOutcome> {
    if !inst.is_unit_square() {
        return Err(Error::InvalidParameter("RPI needs a square instance with unit supplies".into()));
    }
    if n0 < DEFAULT_N0 {
        return Err(Error::InvalidParameter(format!("n0 must be at least {DEFAULT_N0}, got {n0}")));
    }
    let (n, m) = (inst.n_agents(), inst.n_items());
    let mut p = Matrix::zeros(n, m);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut c = vec![1.0; m];
    let mut levels = Vec::new();
    let mut depth = 0;
    while !remaining.is_empty() {
        let nbar = remaining.len();
        let nbar_f = nbar as f64;
        let total: f64 = c.iter().sum();
        debug_assert!((total - nbar_f).abs() <= 1e-6, "supply {total} vs {nbar} agents");
        if nbar < n0 {
            for &i in &remaining {
                for j in 0..m {
                    p[(i, j)] = c[j] / nbar_f;
                }
            }
            levels.push(RpiState {
                depth,
                remaining: remaining.clone(),
                supplies: c.clone(),
                n0,
                seed,
                sampled: Vec::new(),
                fractions: Vec::new(),
            });
            break;
        }
        let k = nbar.div_ceil(2);
        let sampled = sample_agents(&remaining, k, seed, depth);
        let level_inst = inst.with_new_supplies(c.iter().map(|x| x.clamp(0.0, 1.0)).collect())?;
        let offsets = DisagreementPoint(
            (0..n)
                .map(|i| inst.values().row(i).iter().zip(&c).map(|(v, c)| v * c).sum::<f64>() / nbar_f)
                .collect(),
        );
        let fresh;
        let pa = match cache.as_deref_mut() {
            Some(cache) => {
                let key = (sampled.clone(), c.iter().map(|x| x.to_bits()).collect());
                if !cache.runs.contains_key(&key) {
                    let out = pa_run_agents(&level_inst, &sampled, &offsets, tol)?;
                    cache.runs.insert(key.clone(), out);
                }
                &cache.runs[&key]
            }
            None => {
                fresh = pa_run_agents(&level_inst, &sampled, &offsets, tol)?;
                &fresh
            }
        };
        let mut fractions = Vec::with_capacity(k);
        for &i in &sampled {
            let f: f64 = pa.assignment.probs.row(i).iter().sum();
            fractions.push(f);
            for j in 0..m {
                p[(i, j)] = pa.assignment.probs[(i, j)] / 2.0 + (1.0 - f / 2.0) * c[j] / nbar_f;
            }
        }
        levels.push(RpiState {
            depth,
            remaining: remaining.clone(),
            supplies: c.clone(),
            n0,
            seed,
            sampled: sampled.clone(),
            fractions,
        });
        for j in 0..m {
            let used: f64 = sampled.iter().map(|&i| p[(i, j)]).sum();
            let left = c[j] - used;
            if left < -UNDERFLOW_TOL {
                return Err(Error::SupplyUnderflow { item: j, amount: left });
            }
            c[j] = left.max(0.0);
        }
        remaining.retain(|i| !sampled.contains(i));
        depth += 1;
    }
    Ok(RpiOutcome { assignment: FractionalAssignment::from_matrix(p), levels })
}
