//! Core data model: instances, fractional assignments, utility and disagreement vectors.

use std::ops::{Deref, Index, IndexMut};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default feasibility tolerance for assignments.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Dense row-major matrix of f64, serialized as an array of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix { rows, cols, data: vec![value; rows * cols] }
    }

    /// Build from rows; all rows must have equal length.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != c {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {c}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (acc, x) in s.iter_mut().zip(self.row(i)) {
                *acc += x;
            }
        }
        s
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    /// Add `factor * other` in place.
    pub fn add_scaled(&mut self, other: &Matrix, factor: f64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.rows))?;
        for i in 0..self.rows {
            seq.serialize_element(self.row(i))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Raw on-disk form of an instance, before validation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInstance {
    pub values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supplies: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_labels: Option<Vec<String>>,
}

/// A validated matching instance: `n` agents, `m` items, nonnegative values and supplies in [0,1].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(into = "RawInstance")]
pub struct Instance {
    values: Matrix,
    supplies: Vec<f64>,
    agent_labels: Option<Vec<String>>,
    item_labels: Option<Vec<String>>,
}

impl From<Instance> for RawInstance {
    fn from(inst: Instance) -> Self {
        RawInstance {
            values: inst.values.to_rows(),
            supplies: Some(inst.supplies),
            agent_labels: inst.agent_labels,
            item_labels: inst.item_labels,
        }
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        validate_instance(RawInstance::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Check a raw instance and turn it into an [`Instance`]. Missing supplies default to 1.
pub fn validate_instance(raw: RawInstance) -> Result<Instance> {
    let values = Matrix::from_rows(raw.values)?;
    if values.rows() == 0 || values.cols() == 0 {
        return Err(Error::Empty);
    }
    for i in 0..values.rows() {
        for j in 0..values.cols() {
            let v = values[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { agent: i, item: j });
            }
            if v < 0.0 {
                return Err(Error::NegativeValue { agent: i, item: j, value: v });
            }
        }
    }
    let supplies = raw.supplies.unwrap_or_else(|| vec![1.0; values.cols()]);
    if supplies.len() != values.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} supplies for {} items",
            supplies.len(),
            values.cols()
        )));
    }
    for (j, &c) in supplies.iter().enumerate() {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidSupply { item: j, value: c });
        }
    }
    if let Some(l) = &raw.agent_labels {
        if l.len() != values.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} agent labels for {} agents",
                l.len(),
                values.rows()
            )));
        }
    }
    if let Some(l) = &raw.item_labels {
        if l.len() != values.cols() {
            return Err(Error::DimensionMismatch(format!(
                "{} item labels for {} items",
                l.len(),
                values.cols()
            )));
        }
    }
    Ok(Instance {
        values,
        supplies,
        agent_labels: raw.agent_labels,
        item_labels: raw.item_labels,
    })
}

impl Instance {
    /// Unit-supply instance from value rows.
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        validate_instance(RawInstance { values, supplies: None, agent_labels: None, item_labels: None })
    }

    pub fn with_supplies(values: Vec<Vec<f64>>, supplies: Vec<f64>) -> Result<Self> {
        validate_instance(RawInstance {
            values,
            supplies: Some(supplies),
            agent_labels: None,
            item_labels: None,
        })
    }

    pub fn from_matrix(values: Matrix, supplies: Vec<f64>) -> Result<Self> {
        Self::with_supplies(values.to_rows(), supplies)
    }

    pub fn with_labels(mut self, agents: Vec<String>, items: Vec<String>) -> Result<Self> {
        if agents.len() != self.n_agents() || items.len() != self.n_items() {
            return Err(Error::DimensionMismatch("label count does not match instance".into()));
        }
        self.agent_labels = Some(agents);
        self.item_labels = Some(items);
        Ok(self)
    }

    pub fn n_agents(&self) -> usize {
        self.values.rows()
    }

    pub fn n_items(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn value(&self, agent: usize, item: usize) -> f64 {
        self.values[(agent, item)]
    }

    pub fn supplies(&self) -> &[f64] {
        &self.supplies
    }

    pub fn agent_labels(&self) -> Option<&[String]> {
        self.agent_labels.as_deref()
    }

    pub fn item_labels(&self) -> Option<&[String]> {
        self.item_labels.as_deref()
    }

    /// Label of an agent, falling back to its index.
    pub fn agent_name(&self, i: usize) -> String {
        self.agent_labels.as_ref().map_or_else(|| i.to_string(), |l| l[i].clone())
    }

    pub fn item_name(&self, j: usize) -> String {
        self.item_labels.as_ref().map_or_else(|| j.to_string(), |l| l[j].clone())
    }

    /// Copy with one agent's value row replaced (used for misreports).
    pub fn with_row(&self, agent: usize, row: &[f64]) -> Result<Instance> {
        let mut rows = self.values.to_rows();
        rows[agent] = row.to_vec();
        validate_instance(RawInstance {
            values: rows,
            supplies: Some(self.supplies.clone()),
            agent_labels: self.agent_labels.clone(),
            item_labels: self.item_labels.clone(),
        })
    }

    /// Copy with different supplies.
    pub fn with_new_supplies(&self, supplies: Vec<f64>) -> Result<Instance> {
        validate_instance(RawInstance {
            values: self.values.to_rows(),
            supplies: Some(supplies),
            agent_labels: self.agent_labels.clone(),
            item_labels: self.item_labels.clone(),
        })
    }

    /// Square with unit supplies.
    pub fn is_unit_square(&self) -> bool {
        self.n_agents() == self.n_items() && self.supplies.iter().all(|&c| c == 1.0)
    }
}

/// A fractional assignment `p` with a row budget per agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionalAssignment {
    pub probs: Matrix,
    pub row_budget: Vec<f64>,
    pub tolerance: f64,
}

impl FractionalAssignment {
    pub fn new(probs: Matrix, row_budget: Vec<f64>) -> Self {
        FractionalAssignment { probs, row_budget, tolerance: DEFAULT_TOL }
    }

    /// Unit row budgets.
    pub fn from_matrix(probs: Matrix) -> Self {
        let n = probs.rows();
        Self::new(probs, vec![1.0; n])
    }

    pub fn n_agents(&self) -> usize {
        self.probs.rows()
    }

    pub fn n_items(&self) -> usize {
        self.probs.cols()
    }

    pub fn get(&self, agent: usize, item: usize) -> f64 {
        self.probs[(agent, item)]
    }

    /// Verify `0 <= p <= 1`, row sums within budget and column sums within supply.
    pub fn check(&self, inst: &Instance) -> Result<()> {
        let tol = self.tolerance;
        if self.probs.rows() != inst.n_agents() || self.probs.cols() != inst.n_items() {
            return Err(Error::DimensionMismatch(format!(
                "assignment is {}x{}, instance is {}x{}",
                self.probs.rows(),
                self.probs.cols(),
                inst.n_agents(),
                inst.n_items()
            )));
        }
        if self.row_budget.len() != inst.n_agents() {
            return Err(Error::DimensionMismatch("row budget length".into()));
        }
        for i in 0..self.n_agents() {
            for j in 0..self.n_items() {
                let p = self.probs[(i, j)];
                if !p.is_finite() || p < -tol || p > 1.0 + tol {
                    return Err(Error::InfeasibleAssignment(format!("p[{i}][{j}] = {p}")));
                }
            }
        }
        for (i, (s, b)) in self.probs.row_sums().iter().zip(&self.row_budget).enumerate() {
            if *s > b + tol {
                return Err(Error::InfeasibleAssignment(format!("row {i} sums to {s} > {b}")));
            }
        }
        for (j, (s, c)) in self.probs.col_sums().iter().zip(inst.supplies()).enumerate() {
            if *s > c + tol {
                return Err(Error::InfeasibleAssignment(format!("column {j} sums to {s} > {c}")));
            }
        }
        Ok(())
    }

    /// Clamp tiny numerical excursions into [0, 1].
    pub fn finalize(&mut self) {
        for i in 0..self.probs.rows() {
            for x in self.probs.row_mut(i) {
                *x = x.clamp(0.0, 1.0);
            }
        }
    }
}

/// Expected utility per agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UtilityVector(pub Vec<f64>);

impl Deref for UtilityVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Per-agent outside option `o_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DisagreementPoint(pub Vec<f64>);

impl Deref for DisagreementPoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DisagreementPoint {
    pub fn zeros(n: usize) -> Self {
        DisagreementPoint(vec![0.0; n])
    }

    /// Value of a uniformly random share of the supply: `sum_j v_ij c_j / sum_j c_j`.
    /// On a unit-supply square instance this is the row average.
    pub fn uniform(inst: &Instance) -> Self {
        let total: f64 = inst.supplies().iter().sum();
        let o = (0..inst.n_agents())
            .map(|i| {
                if total <= 0.0 {
                    return 0.0;
                }
                inst.values().row(i).iter().zip(inst.supplies()).map(|(v, c)| v * c).sum::<f64>()
                    / total
            })
            .collect();
        DisagreementPoint(o)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

/// `u_i = sum_j v_ij p_ij`.
pub fn utilities(inst: &Instance, p: &FractionalAssignment) -> Result<UtilityVector> {
    if p.n_agents() != inst.n_agents() || p.n_items() != inst.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "assignment is {}x{}, instance is {}x{}",
            p.n_agents(),
            p.n_items(),
            inst.n_agents(),
            inst.n_items()
        )));
    }
    Ok(UtilityVector(utilities_of(inst.values(), &p.probs)))
}

pub(crate) fn utilities_of(values: &Matrix, probs: &Matrix) -> Vec<f64> {
    (0..values.rows())
        .map(|i| values.row(i).iter().zip(probs.row(i)).map(|(v, p)| v * p).sum())
        .collect()
}
