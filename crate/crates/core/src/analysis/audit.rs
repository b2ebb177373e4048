//! Truthfulness audits: does any sampled misreport raise an agent's true expected utility?

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instances::split_seed;
use crate::mechanisms::Mechanism;
use crate::model::{utilities, Instance};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditReport {
    pub mechanism: String,
    /// Largest `misreport utility - truthful utility`, in true values (may be negative).
    pub worst_gain: f64,
    pub worst_agent: Option<usize>,
    pub worst_report: Option<Vec<f64>>,
    pub truthful_utilities: Vec<f64>,
    pub misreports_tried: usize,
}

/// Gain of `agent` from reporting `report` instead of its true row (same seed for both runs).
pub fn misreport_gain(inst: &Instance, mech: &Mechanism, agent: usize, report: &[f64]) -> Result<f64> {
    let truthful = utilities(inst, &mech.run(inst)?)?;
    let lie = mech.run(&inst.with_row(agent, report)?)?;
    Ok(utilities(inst, &lie)?[agent] - truthful[agent])
}

/// Random misreports of `row`: fresh uniform rows, permutations, single-entry edits and
/// mixtures with the truth.
pub fn sample_misreports(row: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = row.iter().copied().fold(0.0, f64::max).max(1.0);
    (0..count)
        .map(|k| match k % 4 {
            0 => (0..row.len()).map(|_| rng.gen::<f64>() * top).collect(),
            1 => {
                let mut r = row.to_vec();
                r.shuffle(&mut rng);
                r
            }
            2 => {
                let mut r = row.to_vec();
                let j = rng.gen_range(0..r.len());
                r[j] = rng.gen::<f64>() * top;
                r
            }
            _ => {
                let a: f64 = rng.gen();
                row.iter().map(|&v| a * v + (1.0 - a) * rng.gen::<f64>() * top).collect()
            }
        })
        .collect()
}

pub fn truthfulness_audit(inst: &Instance, mech: &Mechanism, misreports: usize, seed: u64) -> Result<AuditReport> {
    let truthful = utilities(inst, &mech.run(inst)?)?;
    let n = inst.n_agents();
    let jobs: Vec<(usize, Vec<f64>)> = (0..n)
        .flat_map(|i| {
            sample_misreports(inst.values().row(i), misreports, split_seed(seed, i as u64))
                .into_iter()
                .map(move |r| (i, r))
        })
        .collect();
    let gains: Vec<f64> = jobs
        .par_iter()
        .map(|(i, r)| {
            let lie = mech.run(&inst.with_row(*i, r)?)?;
            Ok(utilities(inst, &lie)?[*i] - truthful[*i])
        })
        .collect::<Result<_>>()?;
    let mut report = AuditReport {
        mechanism: mech.name().to_string(),
        worst_gain: f64::NEG_INFINITY,
        worst_agent: None,
        worst_report: None,
        truthful_utilities: truthful.to_vec(),
        misreports_tried: jobs.len(),
    };
    for ((i, r), g) in jobs.into_iter().zip(gains) {
        if g > report.worst_gain {
            report.worst_gain = g;
            report.worst_agent = Some(i);
            report.worst_report = Some(r);
        }
    }
    if report.worst_agent.is_none() {
        report.worst_gain = 0.0;
    }
    Ok(report)
}
