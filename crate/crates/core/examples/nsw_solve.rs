//! Solve the Nash social welfare program on the three-agent example and check its certificate.
//!
//! ```bash
//! cargo run --example nsw_solve
//! ```

use matchlab::instances::table1;
use matchlab::nsw::{kkt_check, solve, NswProblem, DEFAULT_SOLVER_TOL};
use matchlab::{DisagreementPoint, Result};

pub fn run_example() -> Result<()> {
    let inst = table1();
    let sol = solve(&NswProblem::new(&inst), DEFAULT_SOLVER_TOL)?;
    println!("utilities {:?}", sol.utilities.0);
    println!("item prices {:?}", sol.duals.item_prices);
    let zero = DisagreementPoint::zeros(inst.n_agents());
    let residual = kkt_check(&inst, &sol.assignment, &sol.duals, &zero)?;
    println!("kkt residual {residual:.2e}");
    assert!(residual <= DEFAULT_SOLVER_TOL);

    // drop agent c: a and b now share A and B
    let sub = solve(&NswProblem::new(&inst).agents(vec![0, 1]), DEFAULT_SOLVER_TOL)?;
    println!("without c: {:?}", &sub.utilities.0[..2]);

    // outside options of 1/n of the row sum
    let uni = solve(&NswProblem::new(&inst).offsets(DisagreementPoint::uniform(&inst)), DEFAULT_SOLVER_TOL)?;
    println!("bargaining utilities {:?}", uni.utilities.0);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
