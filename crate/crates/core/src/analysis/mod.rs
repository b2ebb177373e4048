//! Benchmarks, approximation ratios, utility monotonicity and truthfulness audits.

mod asymptotics;
mod audit;
mod benchmark;
mod montecarlo;
mod ratio;
mod rho;

pub use asymptotics::{cardinal_wins, crossover, log2_cardinal_bound, log2_ordinal_bound, CrossoverReport};
pub use audit::{misreport_gain, sample_misreports, truthfulness_audit, AuditReport};
pub use benchmark::{benchmark, BenchmarkResult};
pub use montecarlo::{expected_utilities, rpi_approximation, MonteCarlo, RpiApproxReport};
pub use ratio::{approx_ratio, Ratio, RatioReport};
pub use rho::{rho_exact, rho_exact_with, rho_scan, RhoOffsets, RhoReport, RhoScan, RhoScanTrial, RhoWitness, SkippedAgent, RHO_EXACT_MAX};
