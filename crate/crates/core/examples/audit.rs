//! Search random misreports for a profitable lie, against PA and against PS.

use matchlab::analysis::{misreport_gain, truthfulness_audit};
use matchlab::instances::{gen_random, ValueDistribution};
use matchlab::mechanisms::Mechanism;
use matchlab::Result;

pub fn run_example() -> Result<()> {
    let inst = gen_random(4, ValueDistribution::Uniform01, 21)?;
    for mech in [Mechanism::Pa, Mechanism::Ps] {
        let rep = truthfulness_audit(&inst, &mech, 12, 21)?;
        println!(
            "{}: best gain {:.3e} by agent {:?} over {} reports",
            mech.name(),
            rep.worst_gain,
            rep.worst_agent,
            rep.misreports_tried
        );
    }
    // a single hand-made lie: agent 0 reports only its favourite item
    let row = inst.values().row(0).to_vec();
    let top = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(0);
    let lie: Vec<f64> = (0..row.len()).map(|j| if j == top { 1.0 } else { 0.0 }).collect();
    println!("PA gain from {:?}: {:.3e}", lie, misreport_gain(&inst, &Mechanism::Pa, 0, &lie)?);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
