//! Optimality certificates for the Nash social welfare program.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{Cmp, Lp, LpOutcome};
use crate::model::{utilities_of, DisagreementPoint, FractionalAssignment, Instance, Matrix};

/// Item prices `t` (one per item) and agent prices `q` (one per agent; unchecked agents carry 0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Duals {
    pub item_prices: Vec<f64>,
    pub agent_prices: Vec<f64>,
}

impl Duals {
    pub fn zeros(n_agents: usize, n_items: usize) -> Self {
        Duals { item_prices: vec![0.0; n_items], agent_prices: vec![0.0; n_agents] }
    }
}

/// Value matrix with each agent's row divided by its surplus `u_i - o_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Renormalized {
    pub values: Matrix,
    /// `1 / surplus_i` per agent.
    pub scale: Vec<f64>,
}

/// Which KKT condition is violated worst.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KktCondition {
    NegativeItemPrice,
    NegativeAgentPrice,
    ItemSlackness,
    AgentSlackness,
    PriceBelowValue,
    SupportEquality,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktViolation {
    pub condition: KktCondition,
    pub agent: Option<usize>,
    pub item: Option<usize>,
    pub magnitude: f64,
}

/// Per-condition breakdown of a KKT check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub residual: f64,
    pub worst: Option<KktViolation>,
    /// `max(0, v̂ - t - q)` and, on the support, `|v̂ - t - q|`, per (agent, item); unchecked agents are 0.
    pub pair_residuals: Matrix,
}

fn surplus(inst: &Instance, p: &FractionalAssignment, offsets: &DisagreementPoint) -> Result<Vec<f64>> {
    if offsets.len() != inst.n_agents() {
        return Err(Error::DimensionMismatch(format!(
            "{} offsets for {} agents",
            offsets.len(),
            inst.n_agents()
        )));
    }
    if p.n_agents() != inst.n_agents() || p.n_items() != inst.n_items() {
        return Err(Error::DimensionMismatch("assignment shape differs from instance".into()));
    }
    let u = utilities_of(inst.values(), &p.probs);
    Ok(u.iter().zip(offsets.iter()).map(|(u, o)| u - o).collect())
}

/// Divide each agent's values by its surplus so the surplus becomes 1.
pub fn renormalize(
    inst: &Instance,
    p: &FractionalAssignment,
    offsets: &DisagreementPoint,
) -> Result<Renormalized> {
    renormalize_agents(inst, p, offsets, &(0..inst.n_agents()).collect::<Vec<_>>())
}

/// Like [`renormalize`] but only for the listed agents; other rows are zero.
pub fn renormalize_agents(
    inst: &Instance,
    p: &FractionalAssignment,
    offsets: &DisagreementPoint,
    agents: &[usize],
) -> Result<Renormalized> {
    let s = surplus(inst, p, offsets)?;
    let mut values = Matrix::zeros(inst.n_agents(), inst.n_items());
    let mut scale = vec![0.0; inst.n_agents()];
    for &i in agents {
        if !(s[i] > 0.0) {
            return Err(Error::DegenerateNormalization { agent: i, surplus: s[i] });
        }
        scale[i] = 1.0 / s[i];
        for (dst, v) in values.row_mut(i).iter_mut().zip(inst.values().row(i)) {
            *dst = v / s[i];
        }
    }
    Ok(Renormalized { values, scale })
}

/// Largest KKT violation over all agents.
pub fn kkt_check(
    inst: &Instance,
    p: &FractionalAssignment,
    duals: &Duals,
    offsets: &DisagreementPoint,
) -> Result<f64> {
    let all: Vec<usize> = (0..inst.n_agents()).collect();
    Ok(kkt_report(inst, p, duals, offsets, &all)?.residual)
}

/// Largest KKT violation, checking only `agents` (column sums still count every row of `p`).
pub fn kkt_check_agents(
    inst: &Instance,
    p: &FractionalAssignment,
    duals: &Duals,
    offsets: &DisagreementPoint,
    agents: &[usize],
) -> Result<f64> {
    Ok(kkt_report(inst, p, duals, offsets, agents)?.residual)
}

pub fn kkt_report(
    inst: &Instance,
    p: &FractionalAssignment,
    duals: &Duals,
    offsets: &DisagreementPoint,
    agents: &[usize],
) -> Result<KktReport> {
    let (n, m) = (inst.n_agents(), inst.n_items());
    if duals.item_prices.len() != m || duals.agent_prices.len() != n {
        return Err(Error::DimensionMismatch("dual vector lengths".into()));
    }
    let vhat = renormalize_agents(inst, p, offsets, agents)?.values;
    let support_tol = p.tolerance.max(1e-12);
    let mut worst: Option<KktViolation> = None;
    let mut note = |cond, agent, item, mag: f64| {
        if mag > worst.as_ref().map_or(0.0, |w| w.magnitude) {
            worst = Some(KktViolation { condition: cond, agent, item, magnitude: mag });
        }
    };
    let col = p.probs.col_sums();
    for j in 0..m {
        let t = duals.item_prices[j];
        note(KktCondition::NegativeItemPrice, None, Some(j), -t);
        note(KktCondition::ItemSlackness, None, Some(j), t.abs() * (inst.supplies()[j] - col[j]).abs());
    }
    let row = p.probs.row_sums();
    let mut pairs = Matrix::zeros(n, m);
    for &i in agents {
        let q = duals.agent_prices[i];
        note(KktCondition::NegativeAgentPrice, Some(i), None, -q);
        note(KktCondition::AgentSlackness, Some(i), None, q.abs() * (p.row_budget[i] - row[i]).abs());
        for j in 0..m {
            let gap = vhat[(i, j)] - duals.item_prices[j] - q;
            let r = if p.probs[(i, j)] > support_tol {
                note(KktCondition::SupportEquality, Some(i), Some(j), gap.abs());
                gap.abs()
            } else {
                note(KktCondition::PriceBelowValue, Some(i), Some(j), gap);
                gap.max(0.0)
            };
            pairs[(i, j)] = r;
        }
    }
    let residual = worst.as_ref().map_or(0.0, |w| w.magnitude);
    Ok(KktReport { residual, worst, pair_residuals: pairs })
}

/// Find `(t, q)` certifying `p`, or report the pair that cannot be certified.
pub fn recover_duals(
    inst: &Instance,
    p: &FractionalAssignment,
    offsets: &DisagreementPoint,
    tol: f64,
) -> Result<Duals> {
    let all: Vec<usize> = (0..inst.n_agents()).collect();
    recover_duals_agents(inst, p, offsets, &all, tol)
}

pub fn recover_duals_agents(
    inst: &Instance,
    p: &FractionalAssignment,
    offsets: &DisagreementPoint,
    agents: &[usize],
    tol: f64,
) -> Result<Duals> {
    let duals = fit_duals(inst, p, offsets, agents, tol)?;
    let report = kkt_report(inst, p, &duals, offsets, agents)?;
    if report.residual <= tol {
        return Ok(duals);
    }
    let (agent, item) = worst_pair(&report);
    Err(Error::NotOptimal { agent, item, violation: report.residual })
}

fn worst_pair(report: &KktReport) -> (usize, usize) {
    let m = &report.pair_residuals;
    let mut best = (0, 0, -1.0);
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if m[(i, j)] > best.2 {
                best = (i, j, m[(i, j)]);
            }
        }
    }
    match &report.worst {
        Some(KktViolation { agent: Some(a), item: Some(j), .. }) => (*a, *j),
        _ => (best.0, best.1),
    }
}

/// Least-violation duals: min ε subject to the certificate conditions relaxed by ε,
/// then among those the smallest total agent price.
pub(crate) fn fit_duals(
    inst: &Instance,
    p: &FractionalAssignment,
    offsets: &DisagreementPoint,
    agents: &[usize],
    tol: f64,
) -> Result<Duals> {
    let (n, m) = (inst.n_agents(), inst.n_items());
    let vhat = renormalize_agents(inst, p, offsets, agents)?.values;
    let support_tol = p.tolerance.max(1e-12);
    let col = p.probs.col_sums();
    let row = p.probs.row_sums();
    // variables: t_j (m), q_a (|agents|), eps
    let na = agents.len();
    let eps = m + na;
    let build = |eps_cap: Option<f64>| {
        let mut lp = Lp::new(m + na + 1);
        for j in 0..m {
            if inst.supplies()[j] - col[j] > tol {
                lp.add(vec![(j, 1.0)], Cmp::Eq, 0.0);
            }
        }
        for (a, &i) in agents.iter().enumerate() {
            if p.row_budget[i] - row[i] > tol {
                lp.add(vec![(m + a, 1.0)], Cmp::Eq, 0.0);
            }
            for j in 0..m {
                let v = vhat[(i, j)];
                // v - t - q <= eps
                lp.add(vec![(j, -1.0), (m + a, -1.0), (eps, -1.0)], Cmp::Le, -v);
                if p.probs[(i, j)] > support_tol {
                    // t + q - v <= eps
                    lp.add(vec![(j, 1.0), (m + a, 1.0), (eps, -1.0)], Cmp::Le, v);
                }
            }
        }
        match eps_cap {
            None => lp.set_objective(eps, -1.0),
            Some(cap) => {
                lp.add(vec![(eps, 1.0)], Cmp::Le, cap);
                for a in 0..na {
                    lp.set_objective(m + a, -1.0);
                }
            }
        }
        lp
    };
    let first = match build(None).maximize() {
        LpOutcome::Optimal { value, .. } => -value,
        _ => return Err(Error::Infeasible("dual recovery program has no solution".into())),
    };
    let x = match build(Some(first + 1e-12)).maximize() {
        LpOutcome::Optimal { x, .. } => x,
        _ => return Err(Error::Infeasible("dual recovery program has no solution".into())),
    };
    let mut d = Duals::zeros(n, m);
    d.item_prices.copy_from_slice(&x[..m]);
    for (a, &i) in agents.iter().enumerate() {
        d.agent_prices[i] = x[m + a];
    }
    Ok(d)
}
