//! Turn a fractional assignment into a lottery over matchings and draw from it.

use matchlab::instances::{random_doubly_stochastic, table1};
use matchlab::lottery::{decompose, sample, Lottery};
use matchlab::mechanisms::ps_run;
use matchlab::{FractionalAssignment, Result};

pub fn run_example() -> Result<()> {
    let inst = table1();
    let p = ps_run(&inst);
    let lottery = decompose(&p, 1e-9)?;
    for t in &lottery.terms {
        println!("{:.4} {:?}", t.weight, t.matching);
    }
    let marg = lottery.marginals(inst.n_agents(), inst.n_items());
    assert!(marg.max_abs_diff(&p.probs) < 1e-9);
    println!("lottery utilities {:?}", lottery.expected_utilities(&inst));
    println!("draw: {:?}", sample(&lottery, 7));

    let d = random_doubly_stochastic(6, 0.5, 3)?;
    let l = decompose(&FractionalAssignment::from_matrix(d), 1e-9)?;
    println!("6x6 doubly stochastic: {} terms (cap {})", l.terms.len(), Lottery::term_bound(6));
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
