//! Expected utilities of randomized mechanisms by seeded repetition.

use serde::{Deserialize, Serialize};

use super::ratio::{approx_ratio, Ratio};
use super::rho::rho_exact;
use super::benchmark::benchmark;
use crate::error::Result;
use crate::instances::split_seed;
use crate::mechanisms::{rpi_run_cached, Mechanism, RpiCache};
use crate::model::{utilities, Instance, Matrix};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub runs: usize,
    pub mean_probs: Matrix,
    pub mean: Vec<f64>,
    /// Standard error of each mean.
    pub stderr: Vec<f64>,
}

/// Average `reps` runs of `mech` with seeds split from `seed`.
pub fn expected_utilities(inst: &Instance, mech: &Mechanism, reps: usize, seed: u64, tol: f64) -> Result<MonteCarlo> {
    let (n, m) = (inst.n_agents(), inst.n_items());
    let reps = reps.max(1);
    let mut cache = RpiCache::new();
    let mut sum = vec![0.0; n];
    let mut sq = vec![0.0; n];
    let mut probs = Matrix::zeros(n, m);
    for k in 0..reps {
        let s = split_seed(seed, k as u64);
        let p = match *mech {
            Mechanism::Rpi { n0, .. } => rpi_run_cached(inst, n0, s, tol, &mut cache)?.assignment,
            other => other.with_seed(s).run(inst)?,
        };
        let u = utilities(inst, &p)?;
        for i in 0..n {
            sum[i] += u[i];
            sq[i] += u[i] * u[i];
        }
        probs.add_scaled(&p.probs, 1.0 / reps as f64);
    }
    let r = reps as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / r).collect();
    let stderr = if reps > 1 {
        sq.iter().zip(&mean).map(|(q, mu)| ((q / r - mu * mu).max(0.0) * r / (r - 1.0) / r).sqrt()).collect()
    } else {
        vec![0.0; n]
    };
    Ok(MonteCarlo { runs: reps, mean_probs: probs, mean, stderr })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RpiApproxReport {
    pub rho: f64,
    /// `4 e rho`.
    pub bound: f64,
    pub estimate: MonteCarlo,
    pub benchmark_utilities: Vec<f64>,
    pub ratios: Vec<Ratio>,
    /// Ratios against `mean - 3 stderr`.
    pub ratios_pessimistic: Vec<Ratio>,
    pub max_ratio: Ratio,
    pub max_ratio_pessimistic: Ratio,
    pub within_bound: bool,
}

/// Compare RPI's per-agent ratio with `4 e rho` for one instance.
pub fn rpi_approximation(inst: &Instance, n0: usize, runs: usize, seed: u64, tol: f64) -> Result<RpiApproxReport> {
    let rho = rho_exact(inst, tol)?.rho;
    let bench = benchmark(inst, tol)?;
    let estimate = expected_utilities(inst, &Mechanism::Rpi { n0, seed }, runs, seed, tol)?;
    let ratios = approx_ratio(&estimate.mean, &bench.benchmark_utilities);
    let low: Vec<f64> = estimate.mean.iter().zip(&estimate.stderr).map(|(m, s)| (m - 3.0 * s).max(0.0)).collect();
    let pess = approx_ratio(&low, &bench.benchmark_utilities);
    let bound = 4.0 * std::f64::consts::E * rho;
    Ok(RpiApproxReport {
        rho,
        bound,
        benchmark_utilities: bench.benchmark_utilities,
        within_bound: pess.max.as_f64() <= bound,
        max_ratio: ratios.max,
        max_ratio_pessimistic: pess.max,
        ratios: ratios.per_agent,
        ratios_pessimistic: pess.per_agent,
        estimate,
    })
}
