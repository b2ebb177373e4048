//! Partial Allocation: scale each agent's NSW share by the relative loss it imposes on the others.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{DisagreementPoint, FractionalAssignment, Instance, Matrix};
use crate::nsw::{solve, NswProblem, NswSolution, DEFAULT_SOLVER_TOL};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PaOutcome {
    /// `q = f_i * p*_i` row by row; rows of agents outside the run are zero.
    pub assignment: FractionalAssignment,
    /// `f_i`; 0 for agents outside the run.
    pub fractions: Vec<f64>,
    /// `leave_one_out[i][k]`: agent k's utility when i is removed (`None` for k = i or inactive k).
    pub leave_one_out: Vec<Option<Vec<Option<f64>>>>,
    pub base: NswSolution,
    /// Notes about degenerate-set changes and similar special cases.
    pub flags: Vec<String>,
}

/// PA on all agents of `inst` with the given outside options.
pub fn pa_run(inst: &Instance, offsets: &DisagreementPoint) -> Result<PaOutcome> {
    let agents: Vec<usize> = (0..inst.n_agents()).collect();
    pa_run_agents(inst, &agents, offsets, DEFAULT_SOLVER_TOL)
}

/// PA restricted to `agents`; supplies are taken from `inst`.
pub fn pa_run_agents(
    inst: &Instance,
    agents: &[usize],
    offsets: &DisagreementPoint,
    tol: f64,
) -> Result<PaOutcome> {
    let (n, m) = (inst.n_agents(), inst.n_items());
    let base = solve(&NswProblem::new(inst).agents(agents.to_vec()).offsets(offsets.clone()), tol)?;
    let nd = base.nondegenerate_agents();
    let mut fractions = vec![0.0; n];
    let mut loo = vec![None; n];
    let mut flags = Vec::new();
    if nd.is_empty() {
        flags.push("all_degenerate".to_string());
    }
    for &i in agents {
        if !nd.contains(&i) {
            fractions[i] = 1.0;
            continue;
        }
        let others: Vec<usize> = agents.iter().copied().filter(|&k| k != i).collect();
        if others.is_empty() {
            fractions[i] = 1.0;
            loo[i] = Some(vec![None; n]);
            continue;
        }
        let sol = solve(&NswProblem::new(inst).agents(others.clone()).offsets(offsets.clone()), tol)?;
        let nd_loo = sol.nondegenerate_agents();
        let expected: Vec<usize> = nd.iter().copied().filter(|&k| k != i).collect();
        if expected != nd_loo {
            flags.push(format!("degenerate_set_changed_without_{i}"));
        }
        let mut log_ratio = 0.0;
        for &k in &expected {
            if nd_loo.contains(&k) {
                log_ratio += base.surplus[k].ln() - sol.surplus[k].ln();
            }
        }
        let f = log_ratio.exp();
        if f > 1.0 + 1e-9 {
            flags.push(format!("fraction_above_one_{i}:{f}"));
        }
        fractions[i] = f.min(1.0);
        let mut row = vec![None; n];
        for &k in &others {
            row[k] = Some(sol.utilities[k]);
        }
        loo[i] = Some(row);
    }
    let mut q = Matrix::zeros(n, m);
    for &i in agents {
        for j in 0..m {
            q[(i, j)] = fractions[i] * base.assignment.probs[(i, j)];
        }
    }
    let assignment = FractionalAssignment::new(q, base.assignment.row_budget.clone());
    Ok(PaOutcome { assignment, fractions, leave_one_out: loo, base, flags })
}
