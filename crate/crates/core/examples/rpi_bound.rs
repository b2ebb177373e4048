//! Monte Carlo estimate of RPI's approximation ratio against the 4e·rho guarantee.

use matchlab::analysis::rpi_approximation;
use matchlab::instances::{gen_random, ValueDistribution};
use matchlab::Result;

pub fn run_example() -> Result<()> {
    let inst = gen_random(8, ValueDistribution::Uniform01, 1)?;
    let rep = rpi_approximation(&inst, 4, 100, 1, 1e-7)?;
    println!("rho {:.4}, bound {:.3}", rep.rho, rep.bound);
    println!("max ratio {} (pessimistic {})", rep.max_ratio, rep.max_ratio_pessimistic);
    println!("within bound: {}", rep.within_bound);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
