//! Mechanisms producing fractional assignments (marginals of lotteries over matchings).

mod pa;
mod ps;
mod rpi;
mod rsd;

pub use pa::{pa_run, pa_run_agents, PaOutcome};
pub use ps::ps_run;
pub use rpi::{rpi_run, rpi_run_cached, rpi_run_detailed, RpiCache, sample_agents, RpiOutcome, RpiState, DEFAULT_N0};
pub use rsd::{rankings, rsd_run, RsdMode, RSD_EXACT_MAX};

use crate::error::{Error, Result};
use crate::model::{DisagreementPoint, FractionalAssignment, Instance};
use crate::nsw::DEFAULT_SOLVER_TOL;

/// Names accepted by [`Mechanism::parse`].
pub const MECHANISM_NAMES: [&str; 4] = ["pa", "rpi", "rsd", "ps"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mechanism {
    /// Partial Allocation with zero outside options.
    Pa,
    Rpi { n0: usize, seed: u64 },
    Rsd(RsdMode),
    Ps,
}

impl Mechanism {
    /// Look up a mechanism by name; `rsd` is exact unless `rsd_orders` is given.
    pub fn parse(name: &str, n0: usize, seed: u64, rsd_orders: Option<usize>) -> Result<Self> {
        match name {
            "pa" => Ok(Mechanism::Pa),
            "rpi" => Ok(Mechanism::Rpi { n0, seed }),
            "rsd" => Ok(Mechanism::Rsd(match rsd_orders {
                None => RsdMode::Exact,
                Some(orders) => RsdMode::Sampled { orders, seed },
            })),
            "ps" => Ok(Mechanism::Ps),
            other => Err(Error::InvalidParameter(format!(
                "unknown mechanism {other:?}; expected one of {}",
                MECHANISM_NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::Pa => "pa",
            Mechanism::Rpi { .. } => "rpi",
            Mechanism::Rsd(_) => "rsd",
            Mechanism::Ps => "ps",
        }
    }

    /// Same mechanism with a different seed (no-op for deterministic ones).
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            Mechanism::Rpi { n0, .. } => Mechanism::Rpi { n0, seed },
            Mechanism::Rsd(RsdMode::Sampled { orders, .. }) => Mechanism::Rsd(RsdMode::Sampled { orders, seed }),
            other => other,
        }
    }

    pub fn run(&self, inst: &Instance) -> Result<FractionalAssignment> {
        match *self {
            Mechanism::Pa => Ok(pa_run(inst, &DisagreementPoint::zeros(inst.n_agents()))?.assignment),
            Mechanism::Rpi { n0, seed } => Ok(rpi_run_detailed(inst, n0, seed, DEFAULT_SOLVER_TOL)?.assignment),
            Mechanism::Rsd(mode) => rsd_run(inst, mode),
            Mechanism::Ps => Ok(ps_run(inst)),
        }
    }
}
