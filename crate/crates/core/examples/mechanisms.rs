//! Run PA, RPI, RSD and PS on one random instance and compare each agent with the bargaining
//! benchmark.

use matchlab::analysis::{approx_ratio, benchmark, expected_utilities};
use matchlab::instances::{gen_random, ValueDistribution};
use matchlab::mechanisms::{Mechanism, RsdMode};
use matchlab::{utilities, Result};

pub fn run_example() -> Result<()> {
    let inst = gen_random(6, ValueDistribution::Uniform01, 11)?;
    let bench = benchmark(&inst, 1e-7)?;
    println!("benchmark {:.4?}", bench.benchmark_utilities);

    let mechs = [
        Mechanism::Pa,
        Mechanism::Rsd(RsdMode::Exact),
        Mechanism::Ps,
        Mechanism::Rpi { n0: 4, seed: 11 },
    ];
    for mech in mechs {
        let u = match mech {
            Mechanism::Rpi { .. } => expected_utilities(&inst, &mech, 50, 11, 1e-7)?.mean,
            _ => utilities(&inst, &mech.run(&inst)?)?.0,
        };
        let r = approx_ratio(&u, &bench.benchmark_utilities);
        println!("{:>4} max ratio {} at agent {}", mech.name(), r.max, r.worst_agent);
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
