//! Utility monotonicity: how much can an agent gain when others leave the market?

use matchlab::analysis::{rho_exact, rho_scan};
use matchlab::instances::{table1, GeneratorSpec};
use matchlab::Result;

pub fn run_example() -> Result<()> {
    let inst = table1();
    let rep = rho_exact(&inst, 1e-7)?;
    println!(
        "rho = {:.6} with subset {:?}, agent {}",
        rep.rho, rep.witness_subset, rep.witness_agent
    );
    println!("before {:?} after {:?}", rep.utilities_before, rep.utilities_after);

    let spec: GeneratorSpec = "random:5".parse()?;
    let scan = rho_scan(&spec, 10, 2, &[], 1e-7)?;
    println!("scan of {} instances: max rho {:.4}", scan.trials.len(), scan.max_rho);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
