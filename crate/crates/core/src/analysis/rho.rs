//! Utility monotonicity: how much an agent's NSW utility can fall when others leave.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{split_seed, GeneratorSpec};
use crate::model::{DisagreementPoint, Instance};
use crate::nsw::{solve, NswProblem, NswSolution};

/// Largest instance for subset enumeration.
pub const RHO_EXACT_MAX: usize = 12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoOffsets {
    /// Plain NSW in every restricted solve.
    #[default]
    Zero,
    /// Row averages as outside options (bargaining variant).
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoWitness {
    pub rho: f64,
    pub subset: Vec<usize>,
    pub agent: usize,
    pub utility_before: f64,
    pub utility_after: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SkippedAgent {
    pub subset: Vec<usize>,
    pub agent: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RhoReport {
    pub rho: f64,
    pub witness_subset: Vec<usize>,
    pub witness_agent: usize,
    pub utilities_before: f64,
    pub utilities_after: f64,
    /// Maximum over subsets of size `ceil(n / 2)` only.
    pub half_size: RhoWitness,
    pub offsets: RhoOffsets,
    pub subsets: usize,
    /// Agents degenerate in the full or the restricted solve.
    pub skipped: Vec<SkippedAgent>,
}

fn members(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask >> i & 1 == 1).collect()
}

fn restricted(inst: &Instance, agents: Vec<usize>, offsets: RhoOffsets, tol: f64) -> Result<NswSolution> {
    let mut p = NswProblem::new(inst).agents(agents);
    if offsets == RhoOffsets::Uniform {
        p = p.offsets(DisagreementPoint::uniform(inst));
    }
    solve(&p, tol)
}

pub fn rho_exact(inst: &Instance, tol: f64) -> Result<RhoReport> {
    rho_exact_with(inst, tol, RhoOffsets::Zero)
}

pub fn rho_exact_with(inst: &Instance, tol: f64, offsets: RhoOffsets) -> Result<RhoReport> {
    let n = inst.n_agents();
    if n > RHO_EXACT_MAX {
        return Err(Error::TooLargeForExact { n, max: RHO_EXACT_MAX });
    }
    let full = restricted(inst, (0..n).collect(), offsets, tol)?;
    let nd_full = full.nondegenerate_agents();
    let masks: Vec<u32> = (1..(1u32 << n)).collect();
    let per_subset: Vec<(u32, Vec<RhoWitness>, Vec<SkippedAgent>)> = masks
        .par_iter()
        .map(|&mask| {
            let agents = members(mask, n);
            let sol = restricted(inst, agents.clone(), offsets, tol)?;
            let nd = sol.nondegenerate_agents();
            let mut found = Vec::new();
            let mut skipped = Vec::new();
            for &i in &agents {
                if !nd_full.contains(&i) || !nd.contains(&i) {
                    skipped.push(SkippedAgent { subset: agents.clone(), agent: i });
                    continue;
                }
                let (before, after) = (full.utilities[i], sol.utilities[i]);
                found.push(RhoWitness { rho: before / after, subset: agents.clone(), agent: i, utility_before: before, utility_after: after });
            }
            Ok((mask, found, skipped))
        })
        .collect::<Result<_>>()?;
    let half = n.div_ceil(2);
    let identity = |subset: Vec<usize>| RhoWitness { rho: 1.0, subset, agent: 0, utility_before: 0.0, utility_after: 0.0 };
    let mut best = identity((0..n).collect());
    let mut best_half = identity(Vec::new());
    let mut skipped = Vec::new();
    for (mask, found, sk) in per_subset {
        for w in found {
            if w.rho > best.rho || (best.utility_before == 0.0 && w.rho >= best.rho) {
                best = w.clone();
            }
            if mask.count_ones() as usize == half
                && (w.rho > best_half.rho || (best_half.utility_before == 0.0 && w.rho >= best_half.rho))
            {
                best_half = w;
            }
        }
        skipped.extend(sk);
    }
    Ok(RhoReport {
        rho: best.rho,
        witness_subset: best.subset,
        witness_agent: best.agent,
        utilities_before: best.utility_before,
        utilities_after: best.utility_after,
        half_size: best_half,
        offsets,
        subsets: masks.len(),
        skipped,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RhoScanTrial {
    pub trial: usize,
    /// Generator seed, or `None` for injected instances.
    pub seed: Option<u64>,
    pub rho: f64,
    pub half_rho: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RhoScan {
    pub generator: String,
    pub seed: u64,
    pub trials: Vec<RhoScanTrial>,
    pub max_rho: f64,
    pub argmax: usize,
    /// `(lower, upper, count)` bins over rho.
    pub histogram: Vec<(f64, f64, usize)>,
}

/// Bins: `[1, 1 + 1e-6)` for "no drop", then width 0.05 up to the maximum.
fn histogram(values: &[f64]) -> Vec<(f64, f64, usize)> {
    let mut bins = vec![(f64::NEG_INFINITY, 1.0 + 1e-6, 0)];
    let max = values.iter().copied().fold(1.0, f64::max);
    let mut lo = 1.0 + 1e-6;
    while lo <= max {
        let hi = (lo + 0.05).min(max + 1e-9).max(lo + 1e-9);
        bins.push((lo, hi, 0));
        lo = hi;
    }
    for &v in values {
        if let Some(b) = bins.iter_mut().find(|b| v >= b.0 && v < b.1) {
            b.2 += 1;
        } else if let Some(b) = bins.last_mut() {
            b.2 += 1;
        }
    }
    bins
}

/// `rho_exact` over `trials` generated instances plus any `injected` ones (appended last).
pub fn rho_scan(spec: &GeneratorSpec, trials: usize, seed: u64, injected: &[Instance], tol: f64) -> Result<RhoScan> {
    if trials == 0 && injected.is_empty() {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let mut jobs: Vec<(Option<u64>, Instance)> = Vec::new();
    for t in 0..trials {
        let s = split_seed(seed, t as u64);
        jobs.push((Some(s), spec.generate(s)?));
    }
    jobs.extend(injected.iter().cloned().map(|i| (None, i)));
    let reports: Vec<RhoScanTrial> = jobs
        .par_iter()
        .enumerate()
        .map(|(trial, (s, inst))| {
            let r = rho_exact(inst, tol)?;
            Ok(RhoScanTrial { trial, seed: *s, rho: r.rho, half_rho: r.half_size.rho })
        })
        .collect::<Result<_>>()?;
    let mut argmax = 0;
    for (i, t) in reports.iter().enumerate() {
        if t.rho > reports[argmax].rho {
            argmax = i;
        }
    }
    let rhos: Vec<f64> = reports.iter().map(|t| t.rho).collect();
    Ok(RhoScan {
        generator: spec.to_string(),
        seed,
        max_rho: rhos[argmax],
        argmax,
        histogram: histogram(&rhos),
        trials: reports,
    })
}

impl RhoScan {
    pub fn write_histogram_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::Io { path: path.to_path_buf(), source: e };
        let mut f = std::fs::File::create(path).map_err(io)?;
        writeln!(f, "lower,upper,count").map_err(io)?;
        for (lo, hi, c) in &self.histogram {
            writeln!(f, "{lo},{hi},{c}").map_err(io)?;
        }
        Ok(())
    }

    pub fn write_trials_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::Io { path: path.to_path_buf(), source: e };
        let mut f = std::fs::File::create(path).map_err(io)?;
        writeln!(f, "trial,seed,rho,half_rho").map_err(io)?;
        for t in &self.trials {
            let seed = t.seed.map_or(String::from("injected"), |s| s.to_string());
            writeln!(f, "{},{seed},{},{}", t.trial, t.rho, t.half_rho).map_err(io)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::table1;

    #[test]
    fn table1_rho() {
        let r = rho_exact(&table1(), 1e-7).unwrap();
        assert!((r.rho - 4.0 / 3.0).abs() < 1e-6, "{}", r.rho);
        assert_eq!(r.witness_subset, vec![0, 1]);
        assert_eq!(r.witness_agent, 1);
    }

    #[test]
    fn identical_agents() {
        let inst = Instance::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!((rho_exact(&inst, 1e-7).unwrap().rho - 1.0).abs() < 1e-7);
    }

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[1.0, 1.0, 1.2, 1.33]);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 4);
        assert_eq!(h[0].2, 2);
    }
}
