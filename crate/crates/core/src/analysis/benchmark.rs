use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{DisagreementPoint, Instance};
use crate::nsw::{solve, NswProblem, NswSolution};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub disagreement: DisagreementPoint,
    pub solution: NswSolution,
    pub benchmark_utilities: Vec<f64>,
}

/// Nash bargaining solution with the uniform-random outside option.
pub fn benchmark(inst: &Instance, tol: f64) -> Result<BenchmarkResult> {
    let o = DisagreementPoint::uniform(inst);
    let solution = solve(&NswProblem::new(inst).offsets(o.clone()), tol)?;
    let benchmark_utilities = solution.utilities.to_vec();
    Ok(BenchmarkResult { disagreement: o, solution, benchmark_utilities })
}
