//! Instance generators and their string specs.

use matchlab::instances::{sinkhorn, GeneratorSpec};
use matchlab::mechanisms::{rsd_run, RsdMode};
use matchlab::{utilities, Matrix, Result};

pub fn run_example() -> Result<()> {
    for spec in ["random:4", "random:4,grid=3", "random:4,sparse=0.5", "rsd-worst:4,0.01", "ordinal-worst:4", "table1"] {
        let g: GeneratorSpec = spec.parse()?;
        let inst = g.generate(1)?;
        println!("{g}: {:.3?}", inst.values().to_rows());
    }
    // on the RSD-hard family agent 0 gets about 1/n of its item
    let inst: GeneratorSpec = "rsd-worst:6,0.001".parse()?;
    let inst = inst.generate(0)?;
    let u = utilities(&inst, &rsd_run(&inst, RsdMode::Exact)?)?;
    println!("RSD utilities {:.4?}", u.0);

    let balanced = sinkhorn(Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]])?, 1e-12, 1000)?;
    println!("sinkhorn {:?}", balanced.to_rows());
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
