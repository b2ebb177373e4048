//! Partial Allocation in detail: each agent keeps the fraction of its NSW bundle that equals the
//! welfare loss it imposes on the others. RPI then recurses on sampled subsets.

use matchlab::instances::{gen_random, table1, ValueDistribution};
use matchlab::mechanisms::{pa_run, rpi_run_detailed};
use matchlab::{DisagreementPoint, Result};

pub fn run_example() -> Result<()> {
    let inst = table1();
    let pa = pa_run(&inst, &DisagreementPoint::zeros(3))?;
    println!("fractions {:?}", pa.fractions);
    println!("PA probs {:?}", pa.assignment.probs.to_rows());
    if !pa.flags.is_empty() {
        println!("flags {:?}", pa.flags);
    }

    let big = gen_random(10, ValueDistribution::Uniform01, 5)?;
    let out = rpi_run_detailed(&big, 4, 5, 1e-7)?;
    for level in &out.levels {
        println!(
            "depth {} remaining {} sampled {:?} fractions {:.3?}",
            level.depth,
            level.remaining.len(),
            level.sampled,
            level.fractions
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
