//! Nash social welfare: maximize `sum_i log(u_i - o_i)` over row-budgeted, supply-capped
//! fractional assignments, with a KKT certificate attached to every solution.

mod barrier;
mod kkt;
mod polish;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{Cmp, Lp, LpOutcome};
use crate::model::{utilities_of, DisagreementPoint, FractionalAssignment, Instance, Matrix, UtilityVector};

pub use kkt::{
    kkt_check, kkt_check_agents, kkt_report, recover_duals, recover_duals_agents, renormalize,
    renormalize_agents, Duals, KktCondition, KktReport, KktViolation, Renormalized,
};

/// Default KKT tolerance.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-7;
/// Default cap on Newton iterations.
pub const DEFAULT_MAX_ITERATIONS: usize = 200_000;

/// Surplus (in row-normalized units) below which an agent counts as degenerate.
const DEGENERATE_TOL: f64 = 1e-9;

/// One NSW program: which agents take part, their outside options and row budgets.
#[derive(Clone, Debug)]
pub struct NswProblem<'a> {
    instance: &'a Instance,
    agents: Vec<usize>,
    offsets: DisagreementPoint,
    row_budget: Vec<f64>,
}

impl<'a> NswProblem<'a> {
    /// All agents, zero offsets, unit budgets.
    pub fn new(instance: &'a Instance) -> Self {
        let n = instance.n_agents();
        NswProblem {
            instance,
            agents: (0..n).collect(),
            offsets: DisagreementPoint::zeros(n),
            row_budget: vec![1.0; n],
        }
    }

    /// Restrict to a subset of agents (indices into the instance).
    pub fn agents(mut self, agents: Vec<usize>) -> Self {
        self.agents = agents;
        self
    }

    /// Outside options, indexed by instance agent.
    pub fn offsets(mut self, offsets: DisagreementPoint) -> Self {
        self.offsets = offsets;
        self
    }

    /// Row budgets, indexed by instance agent.
    pub fn row_budget(mut self, budget: Vec<f64>) -> Self {
        self.row_budget = budget;
        self
    }

    pub fn instance(&self) -> &Instance {
        self.instance
    }

    pub fn active_agents(&self) -> &[usize] {
        &self.agents
    }

    pub fn offset_vector(&self) -> &DisagreementPoint {
        &self.offsets
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.instance.n_agents();
        if self.agents.is_empty() {
            return Err(Error::InvalidParameter("no active agents".into()));
        }
        let mut seen = vec![false; n];
        for &a in &self.agents {
            if a >= n || seen[a] {
                return Err(Error::InvalidParameter(format!("bad or repeated agent index {a}")));
            }
            seen[a] = true;
        }
        if self.offsets.len() != n {
            return Err(Error::DimensionMismatch(format!("{} offsets for {n} agents", self.offsets.len())));
        }
        if self.row_budget.len() != n {
            return Err(Error::DimensionMismatch(format!("{} row budgets for {n} agents", self.row_budget.len())));
        }
        for &a in &self.agents {
            let b = self.row_budget[a];
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::InvalidParameter(format!("row budget {b} of agent {a} not in (0, 1]")));
            }
            let o = self.offsets[a];
            if !o.is_finite() || o < 0.0 {
                return Err(Error::InvalidParameter(format!("offset {o} of agent {a}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct NswOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub trace: bool,
}

impl Default for NswOptions {
    fn default() -> Self {
        NswOptions { tol: DEFAULT_SOLVER_TOL, max_iterations: DEFAULT_MAX_ITERATIONS, trace: false }
    }
}

/// One row of the optional convergence trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NswSolution {
    pub assignment: FractionalAssignment,
    pub utilities: UtilityVector,
    /// `u_i - o_i`; zero for agents outside the problem.
    pub surplus: Vec<f64>,
    /// `sum log(surplus)` over non-degenerate active agents.
    pub objective: f64,
    pub duals: Duals,
    pub kkt_residual: f64,
    pub active_agents: Vec<usize>,
    pub degenerate_agents: Vec<usize>,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRow>,
}

impl NswSolution {
    /// Active agents with positive achievable surplus.
    pub fn nondegenerate_agents(&self) -> Vec<usize> {
        self.active_agents.iter().copied().filter(|a| !self.degenerate_agents.contains(a)).collect()
    }

    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::Io { path: path.to_path_buf(), source: e };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(f, "iteration,objective,residual").map_err(io)?;
        for r in &self.trace {
            writeln!(f, "{},{},{}", r.iteration, r.objective, r.residual).map_err(io)?;
        }
        f.flush().map_err(io)
    }
}

/// Solve with default options and the given KKT tolerance.
pub fn solve(problem: &NswProblem, tol: f64) -> Result<NswSolution> {
    solve_with(problem, &NswOptions { tol, ..NswOptions::default() })
}

/// Non-degenerate agents restricted to supplied items, rows scaled to max value 1.
pub(crate) struct Reduced {
    pub agents: Vec<usize>,
    pub items: Vec<usize>,
    pub w: Vec<f64>,
    pub off: Vec<f64>,
    pub budget: Vec<f64>,
    pub supply: Vec<f64>,
    /// `sum log(sigma_a)`: converts the normalized objective back to original units.
    pub log_scale: f64,
}

impl Reduced {
    pub fn na(&self) -> usize {
        self.agents.len()
    }

    pub fn nm(&self) -> usize {
        self.items.len()
    }

    pub fn surplus(&self, x: &[f64]) -> Vec<f64> {
        let nm = self.nm();
        (0..self.na())
            .map(|a| {
                let row = &self.w[a * nm..(a + 1) * nm];
                row.iter().zip(&x[a * nm..(a + 1) * nm]).map(|(w, x)| w * x).sum::<f64>() - self.off[a]
            })
            .collect()
    }
}

fn scale_of(inst: &Instance, items: &[usize], offsets: &DisagreementPoint, i: usize) -> f64 {
    items.iter().map(|&j| inst.value(i, j)).fold(offsets[i], f64::max)
}

/// LP over `agents` x `items`: maximize the smallest normalized surplus (optionally only agent `target`'s).
fn max_surplus_lp(
    inst: &Instance,
    problem: &NswProblem,
    agents: &[usize],
    items: &[usize],
    target: Option<usize>,
) -> Option<(f64, Vec<f64>)> {
    let (na, nm) = (agents.len(), items.len());
    let tau_p = na * nm;
    let tau_m = tau_p + 1;
    let mut lp = Lp::new(na * nm + 2);
    for (a, &i) in agents.iter().enumerate() {
        lp.add((0..nm).map(|k| (a * nm + k, 1.0)).collect(), Cmp::Le, problem.row_budget[i]);
    }
    for (k, &j) in items.iter().enumerate() {
        lp.add((0..na).map(|a| (a * nm + k, 1.0)).collect(), Cmp::Le, inst.supplies()[j]);
    }
    for (a, &i) in agents.iter().enumerate() {
        let sigma = scale_of(inst, items, &problem.offsets, i);
        let mut row: Vec<(usize, f64)> =
            (0..nm).map(|k| (a * nm + k, inst.value(i, items[k]) / sigma)).filter(|c| c.1 != 0.0).collect();
        let rhs = problem.offsets[i] / sigma;
        match target {
            Some(t) if t == a => {
                row.push((tau_p, -1.0));
                row.push((tau_m, 1.0));
                lp.add(row, Cmp::Ge, rhs);
            }
            Some(_) => lp.add(row, Cmp::Ge, rhs),
            None => {
                row.push((tau_p, -1.0));
                row.push((tau_m, 1.0));
                lp.add(row, Cmp::Ge, rhs);
            }
        }
    }
    lp.set_objective(tau_p, 1.0);
    lp.set_objective(tau_m, -1.0);
    // keep tau bounded so the target LP never reports unbounded
    lp.add(vec![(tau_p, 1.0)], Cmp::Le, 2.0);
    match lp.maximize() {
        LpOutcome::Optimal { x, value } => Some((value, x[..na * nm].to_vec())),
        _ => None,
    }
}

/// Split active agents into (non-degenerate, degenerate); also returns the max-min surplus LP
/// solution for the non-degenerate set when offsets are present.
fn classify(
    problem: &NswProblem,
    items: &[usize],
) -> Result<(Vec<usize>, Vec<usize>, Option<(f64, Vec<f64>)>)> {
    let inst = problem.instance;
    let zero_offsets = problem.agents.iter().all(|&i| problem.offsets[i] == 0.0);
    let (mut nd, mut deg) = (Vec::new(), Vec::new());
    for &i in &problem.agents {
        if scale_of(inst, items, &problem.offsets, i) <= 0.0 {
            deg.push(i);
        } else {
            nd.push(i);
        }
    }
    if zero_offsets || nd.is_empty() {
        return Ok((nd, deg, None));
    }
    let (tau, x) = max_surplus_lp(inst, problem, &nd, items, None)
        .ok_or_else(|| Error::Infeasible("max-min surplus program failed".into()))?;
    if tau < -DEGENERATE_TOL {
        return Err(Error::Infeasible(format!(
            "some agent cannot reach its outside option (best worst-case normalized surplus {tau:e})"
        )));
    }
    if tau > DEGENERATE_TOL {
        return Ok((nd, deg, Some((tau, x))));
    }
    let mut keep = Vec::new();
    for (a, &i) in nd.iter().enumerate() {
        let best = max_surplus_lp(inst, problem, &nd, items, Some(a)).map_or(0.0, |r| r.0);
        if best > DEGENERATE_TOL {
            keep.push(i);
        } else {
            deg.push(i);
        }
    }
    deg.sort_unstable();
    if keep.is_empty() {
        return Ok((keep, deg, None));
    }
    let sub = max_surplus_lp(inst, problem, &keep, items, None)
        .filter(|r| r.0 > DEGENERATE_TOL)
        .ok_or_else(|| Error::Infeasible("no joint point with positive surplus".into()))?;
    Ok((keep, deg, Some(sub)))
}

fn strictly_interior_start(red: &Reduced, lp_point: Option<(f64, Vec<f64>)>) -> Vec<f64> {
    let (na, nm) = (red.na(), red.nm());
    let denom = 2.0 * na.max(nm) as f64;
    let mut xu = vec![0.0; na * nm];
    for a in 0..na {
        for k in 0..nm {
            xu[a * nm + k] = red.budget[a].min(red.supply[k]) / denom;
        }
    }
    let Some((tau, xl)) = lp_point else { return xu };
    let su = red.surplus(&xu);
    let min_su = su.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda = if min_su >= tau { 0.5 } else { 0.5 * tau / (tau - min_su) };
    xl.iter().zip(&xu).map(|(l, u)| (1.0 - lambda) * l + lambda * u).collect()
}

pub fn solve_with(problem: &NswProblem, opts: &NswOptions) -> Result<NswSolution> {
    problem.validate()?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let inst = problem.instance;
    let (n, m) = (inst.n_agents(), inst.n_items());
    let items: Vec<usize> = (0..m).filter(|&j| inst.supplies()[j] > 0.0).collect();
    let (nd, degenerate, lp_point) = classify(problem, &items)?;

    let mut iterations = 0;
    let mut trace = Vec::new();
    let mut candidates = Vec::new();
    if !nd.is_empty() {
        let nm = items.len();
        let mut w = Vec::with_capacity(nd.len() * nm);
        let mut off = Vec::with_capacity(nd.len());
        let mut log_scale = 0.0;
        for &i in &nd {
            let sigma = scale_of(inst, &items, &problem.offsets, i);
            log_scale += sigma.ln();
            w.extend(items.iter().map(|&j| inst.value(i, j) / sigma));
            off.push(problem.offsets[i] / sigma);
        }
        let red = Reduced {
            budget: nd.iter().map(|&i| problem.row_budget[i]).collect(),
            supply: items.iter().map(|&j| inst.supplies()[j]).collect(),
            agents: nd.clone(),
            items: items.clone(),
            w,
            off,
            log_scale,
        };
        let x0 = strictly_interior_start(&red, lp_point);
        let bar = barrier::run(&red, x0, opts, &mut trace)?;
        iterations += bar.iterations;
        candidates = polish::refine(&red, &bar, opts, &mut iterations)?;
    }

    let mut best: Option<(FractionalAssignment, Duals, f64)> = None;
    let tries = candidates.len().max(1);
    for c in 0..tries {
        let mut probs = Matrix::zeros(n, m);
        let mut duals = Duals::zeros(n, m);
        if let Some(cand) = candidates.get(c) {
            let nm = items.len();
            for (a, &i) in nd.iter().enumerate() {
                for (k, &j) in items.iter().enumerate() {
                    probs[(i, j)] = cand.x[a * nm + k];
                }
                duals.agent_prices[i] = cand.q[a];
            }
            for (k, &j) in items.iter().enumerate() {
                duals.item_prices[j] = cand.t[k];
            }
        }
        fill_degenerate(problem, &degenerate, &mut probs, opts.tol)?;
        complete_rows(problem, &mut probs);
        let mut row_budget = vec![0.0; n];
        for &i in &problem.agents {
            row_budget[i] = problem.row_budget[i];
        }
        let mut assignment = FractionalAssignment::new(probs, row_budget);
        assignment.finalize();
        let mut residual = 0.0;
        if !nd.is_empty() {
            let u = utilities_of(inst.values(), &assignment.probs);
            // items without supply can never be used; price them out
            for j in 0..m {
                if inst.supplies()[j] <= 0.0 {
                    duals.item_prices[j] = nd
                        .iter()
                        .map(|&i| inst.value(i, j) / (u[i] - problem.offsets[i]))
                        .fold(0.0, f64::max);
                }
            }
            residual = kkt_check_agents(inst, &assignment, &duals, &problem.offsets, &nd)?;
            if residual > opts.tol {
                if let Ok(d) = kkt::fit_duals(inst, &assignment, &problem.offsets, &nd, opts.tol) {
                    let r = kkt_check_agents(inst, &assignment, &d, &problem.offsets, &nd)?;
                    if r < residual {
                        residual = r;
                        duals = d;
                    }
                }
            }
        }
        if best.as_ref().map_or(true, |b| residual < b.2) {
            best = Some((assignment, duals, residual));
        }
        if residual <= opts.tol {
            break;
        }
    }
    let (assignment, duals, kkt_residual) = best.expect("at least one candidate");
    if kkt_residual > opts.tol {
        return Err(Error::NoConvergence { iterations, best_residual: kkt_residual });
    }
    let u = utilities_of(inst.values(), &assignment.probs);
    let mut surplus = vec![0.0; n];
    for &i in &problem.agents {
        surplus[i] = u[i] - problem.offsets[i];
    }
    let objective = nd.iter().map(|&i| surplus[i].ln()).sum();

    Ok(NswSolution {
        utilities: UtilityVector(u),
        assignment,
        surplus,
        objective,
        duals,
        kkt_residual,
        active_agents: problem.agents.clone(),
        degenerate_agents: degenerate,
        iterations,
        trace,
    })
}

/// Degenerate agents get a pro-rata share of each item's leftover supply.
fn fill_degenerate(
    problem: &NswProblem,
    degenerate: &[usize],
    probs: &mut Matrix,
    tol: f64,
) -> Result<()> {
    if degenerate.is_empty() {
        return Ok(());
    }
    let inst = problem.instance;
    let m = inst.n_items();
    let used = probs.col_sums();
    let residual: Vec<f64> = (0..m).map(|j| (inst.supplies()[j] - used[j]).max(0.0)).collect();
    let total: f64 = residual.iter().sum();
    let demand: f64 = degenerate.iter().map(|&i| problem.row_budget[i]).sum();
    let denom = total.max(demand);
    if denom > 0.0 {
        for &i in degenerate {
            let alpha = problem.row_budget[i] / denom;
            for j in 0..m {
                probs[(i, j)] = alpha * residual[j];
            }
        }
    }
    let bad = degenerate.iter().any(|&i| {
        let u: f64 = inst.values().row(i).iter().zip(probs.row(i)).map(|(v, p)| v * p).sum();
        u - problem.offsets[i] < -tol * problem.offsets[i].max(1.0)
    });
    if !bad {
        return Ok(());
    }
    // pro-rata share leaves someone below the outside option: place them by LP instead
    let na = degenerate.len();
    let mut lp = Lp::new(na * m + 2);
    for (a, &i) in degenerate.iter().enumerate() {
        lp.add((0..m).map(|j| (a * m + j, 1.0)).collect(), Cmp::Le, problem.row_budget[i]);
        let sigma = inst.values().row(i).iter().copied().fold(problem.offsets[i], f64::max).max(1e-300);
        let mut row: Vec<(usize, f64)> = (0..m).map(|j| (a * m + j, inst.value(i, j) / sigma)).collect();
        row.push((na * m, -1.0));
        row.push((na * m + 1, 1.0));
        lp.add(row, Cmp::Ge, problem.offsets[i] / sigma);
    }
    for j in 0..m {
        lp.add((0..na).map(|a| (a * m + j, 1.0)).collect(), Cmp::Le, residual[j]);
    }
    lp.add(vec![(na * m, 1.0)], Cmp::Le, 1.0);
    lp.set_objective(na * m, 1.0);
    lp.set_objective(na * m + 1, -1.0);
    match lp.maximize() {
        LpOutcome::Optimal { x, value } if value >= -tol => {
            for (a, &i) in degenerate.iter().enumerate() {
                for j in 0..m {
                    probs[(i, j)] = x[a * m + j];
                }
            }
            Ok(())
        }
        _ => Err(Error::Infeasible("degenerate agents cannot all reach their outside option".into())),
    }
}

/// Top up under-full rows from leftover supply (agent order, then item order). On an optimum this
/// only touches zero-value pairs, so utilities and the certificate are unchanged.
fn complete_rows(problem: &NswProblem, probs: &mut Matrix) {
    let inst = problem.instance;
    let m = inst.n_items();
    let used = probs.col_sums();
    let mut residual: Vec<f64> = (0..m).map(|j| (inst.supplies()[j] - used[j]).max(0.0)).collect();
    for &i in &problem.agents {
        let mut slack = problem.row_budget[i] - probs.row(i).iter().sum::<f64>();
        for j in 0..m {
            if slack <= 1e-12 {
                break;
            }
            if residual[j] > 1e-12 {
                let add = slack.min(residual[j]);
                probs[(i, j)] += add;
                residual[j] -= add;
                slack -= add;
            }
        }
    }
}
