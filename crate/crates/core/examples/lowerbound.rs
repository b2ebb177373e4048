//! The recursive lower-bound market: exact parameters, equilibrium certificates and the loser.

use matchlab::instances::lowerbound::{Equilibrium, SfRule};
use matchlab::instances::{gen_lowerbound, lowerbound_params, LowerBoundParams};
use matchlab::Result;

pub fn run_example() -> Result<()> {
    for s in 1..=3 {
        let p = lowerbound_params(s)?;
        println!(
            "s={s}: v_s={} k0={} agents={} issues={}",
            p.v_s(),
            p.k0,
            p.n_agents,
            p.issues().len()
        );
    }
    let lb = gen_lowerbound(1)?;
    for table in lb.market.tables() {
        for eq in [Equilibrium::Initial, Equilibrium::Final] {
            let c = lb.market.certify(table, eq);
            println!("{:?} {:?}: residual {}", c.table, c.equilibrium, c.exact);
        }
    }
    println!("loser utility ratio {}", lb.market.loser_ratio());

    // the other size rule keeps every valuation positive further out
    let derived = LowerBoundParams::with_rule(6, SfRule::Derived)?;
    println!("derived rule at s=6: {} issues", derived.issues().len());
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
