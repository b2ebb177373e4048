//! Birkhoff-von-Neumann lotteries: fractional assignments as distributions over matchings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{FractionalAssignment, Instance, Matrix};

/// Entries below this are treated as zero.
const ZERO: f64 = 1e-12;

/// One matching: `matching[i]` is agent `i`'s item, or `None` if unmatched.
#[derive(Clone, Debug, PartialEq)]
pub struct LotteryTerm {
    pub weight: f64,
    pub matching: Vec<Option<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lottery {
    pub terms: Vec<LotteryTerm>,
    /// Mass not covered by any term (numerical leftovers).
    pub residual: f64,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    weight: f64,
    matching: Vec<i64>,
}

impl Serialize for Lottery {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms: Vec<TermJson> = self
            .terms
            .iter()
            .map(|t| TermJson {
                weight: t.weight,
                matching: t.matching.iter().map(|m| m.map_or(-1, |j| j as i64)).collect(),
            })
            .collect();
        terms.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Lottery {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<TermJson>::deserialize(d)?;
        let terms: Vec<LotteryTerm> = raw
            .into_iter()
            .map(|t| LotteryTerm {
                weight: t.weight,
                matching: t.matching.into_iter().map(|j| usize::try_from(j).ok()).collect(),
            })
            .collect();
        let total: f64 = terms.iter().map(|t| t.weight).sum();
        Ok(Lottery { terms, residual: (1.0 - total).max(0.0) })
    }
}

impl Lottery {
    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    /// `sum_t w_t [i -> j in t]`.
    pub fn marginals(&self, n_agents: usize, n_items: usize) -> Matrix {
        let mut m = Matrix::zeros(n_agents, n_items);
        for t in &self.terms {
            for (i, j) in t.matching.iter().enumerate() {
                if let Some(j) = j {
                    m[(i, *j)] += t.weight;
                }
            }
        }
        m
    }

    /// Expected utility of each agent when the lottery is executed.
    pub fn expected_utilities(&self, inst: &Instance) -> Vec<f64> {
        let mut u = vec![0.0; inst.n_agents()];
        for t in &self.terms {
            for (i, j) in t.matching.iter().enumerate() {
                if let Some(j) = j {
                    u[i] += t.weight * inst.value(i, *j);
                }
            }
        }
        u
    }

    /// Marcus-Ree style cap on the number of terms for a `k x k` doubly stochastic input.
    pub fn term_bound(k: usize) -> usize {
        let k = k.max(1);
        (k - 1) * (k - 1) + 1
    }
}

/// Perfect matching on `{(r, c): a[r][c] >= threshold}`; rows scan columns in index order.
fn perfect_matching(a: &Matrix, threshold: f64) -> Option<Vec<usize>> {
    let k = a.rows();
    let mut col_owner: Vec<Option<usize>> = vec![None; k];
    fn augment(
        a: &Matrix,
        th: f64,
        r: usize,
        seen: &mut [bool],
        col_owner: &mut [Option<usize>],
    ) -> bool {
        for c in 0..a.cols() {
            if a[(r, c)] >= th && a[(r, c)] > 0.0 && !seen[c] {
                seen[c] = true;
                if col_owner[c].map_or(true, |o| augment(a, th, o, seen, col_owner)) {
                    col_owner[c] = Some(r);
                    return true;
                }
            }
        }
        false
    }
    for r in 0..k {
        let mut seen = vec![false; k];
        if !augment(a, threshold, r, &mut seen, &mut col_owner) {
            return None;
        }
    }
    let mut row_to_col = vec![0; k];
    for (c, o) in col_owner.iter().enumerate() {
        row_to_col[o.expect("perfect")] = c;
    }
    Some(row_to_col)
}

/// Perfect matching maximizing its smallest entry.
fn bottleneck_matching(a: &Matrix) -> Option<Vec<usize>> {
    let mut vals: Vec<f64> = a.as_slice().iter().copied().filter(|&v| v > 0.0).collect();
    vals.sort_by(|x, y| y.total_cmp(x));
    vals.dedup();
    if vals.is_empty() {
        return None;
    }
    // find the largest threshold (smallest index) admitting a perfect matching
    let (mut lo, mut hi) = (0usize, vals.len() - 1);
    let mut best = perfect_matching(a, vals[hi])?;
    while lo < hi {
        let mid = (lo + hi) / 2;
        match perfect_matching(a, vals[mid]) {
            Some(m) => {
                best = m;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    Some(best)
}

/// Decompose a row- and column-substochastic matrix into weighted matchings.
pub fn decompose(p: &FractionalAssignment, tol: f64) -> Result<Lottery> {
    let (n, m) = (p.n_agents(), p.n_items());
    let probs = &p.probs;
    for i in 0..n {
        for j in 0..m {
            let v = probs[(i, j)];
            if !v.is_finite() || v < -tol || v > 1.0 + tol {
                return Err(Error::NotDecomposable(format!("entry ({i}, {j}) = {v}")));
            }
        }
    }
    let rows = probs.row_sums();
    let cols = probs.col_sums();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| **r > 1.0 + tol) {
        return Err(Error::NotDecomposable(format!("row {i} sums to {r}")));
    }
    if let Some((j, c)) = cols.iter().enumerate().find(|(_, c)| **c > 1.0 + tol) {
        return Err(Error::NotDecomposable(format!("column {j} sums to {c}")));
    }
    let clean = |v: f64| if v < ZERO { 0.0 } else { v.min(1.0) };
    let square = n == m
        && rows.iter().chain(&cols).all(|s| (s - 1.0).abs() <= tol);
    let (mut a, k) = if square {
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = clean(probs[(i, j)]);
            }
        }
        (a, n)
    } else {
        // [[P, diag(1 - r)], [diag(1 - c), P^T]] is doubly stochastic
        let k = n + m;
        let mut a = Matrix::zeros(k, k);
        for i in 0..n {
            for j in 0..m {
                let v = clean(probs[(i, j)]);
                a[(i, j)] = v;
                a[(n + j, m + i)] = v;
            }
            a[(i, m + i)] = clean(1.0 - rows[i]);
        }
        for j in 0..m {
            a[(n + j, j)] = clean(1.0 - cols[j]);
        }
        (a, k)
    };

    let mut terms: Vec<LotteryTerm> = Vec::new();
    let mut total = 0.0;
    let cap = 4 * Lottery::term_bound(k) + 4;
    while total < 1.0 - ZERO && terms.len() < cap {
        let Some(perm) = bottleneck_matching(&a) else { break };
        let w = perm.iter().enumerate().map(|(r, &c)| a[(r, c)]).fold(f64::INFINITY, f64::min);
        for (r, &c) in perm.iter().enumerate() {
            let v = a[(r, c)];
            a[(r, c)] = if v == w || v - w < ZERO { 0.0 } else { v - w };
        }
        total += w;
        let matching: Vec<Option<usize>> =
            (0..n).map(|i| if perm[i] < m { Some(perm[i]) } else { None }).collect();
        match terms.iter_mut().find(|t| t.matching == matching) {
            Some(t) => t.weight += w,
            None => terms.push(LotteryTerm { weight: w, matching }),
        }
    }
    let residual = (1.0 - total).max(0.0);
    if residual > tol.max(ZERO) * k as f64 {
        return Err(Error::NotDecomposable(format!("{residual:e} of the mass could not be matched")));
    }
    Ok(Lottery { terms, residual })
}

/// Draw a matching; leftover mass goes to the lexicographically smallest term.
pub fn sample(lottery: &Lottery, seed: u64) -> Vec<Option<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for t in &lottery.terms {
        acc += t.weight;
        if u < acc {
            return t.matching.clone();
        }
    }
    let key = |m: &[Option<usize>]| m.iter().map(|j| j.map_or(-1, |j| j as i64)).collect::<Vec<_>>();
    lottery
        .terms
        .iter()
        .min_by(|a, b| key(&a.matching).cmp(&key(&b.matching)))
        .map(|t| t.matching.clone())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fa(rows: Vec<Vec<f64>>) -> FractionalAssignment {
        FractionalAssignment::from_matrix(Matrix::from_rows(rows).unwrap())
    }

    #[test]
    fn identity_is_one_term() {
        let l = decompose(&FractionalAssignment::from_matrix(Matrix::identity(3)), 1e-9).unwrap();
        assert_eq!(l.terms.len(), 1);
        assert_eq!(l.terms[0].weight, 1.0);
        assert_eq!(l.terms[0].matching, vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn halves_split_in_two() {
        let l = decompose(&fa(vec![vec![0.5, 0.5], vec![0.5, 0.5]]), 1e-9).unwrap();
        assert_eq!(l.terms.len(), 2);
        assert!(l.terms.iter().all(|t| t.weight == 0.5));
    }

    #[test]
    fn cyclic_halves_reconstruct() {
        let p = fa(vec![vec![0.5, 0.5, 0.0], vec![0.5, 0.0, 0.5], vec![0.0, 0.5, 0.5]]);
        let l = decompose(&p, 1e-9).unwrap();
        assert_eq!(l.terms.len(), 2);
        assert!(l.marginals(3, 3).max_abs_diff(&p.probs) <= 1e-12);
    }

    #[test]
    fn substochastic_is_padded() {
        let p = fa(vec![vec![0.5, 0.25], vec![0.0, 0.5]]);
        let l = decompose(&p, 1e-9).unwrap();
        assert!(l.marginals(2, 2).max_abs_diff(&p.probs) <= 1e-12);
        assert!((l.total_weight() - 1.0).abs() < 1e-12);
        assert!(l.terms.iter().any(|t| t.matching.contains(&None)));
    }

    #[test]
    fn overfull_column_is_rejected() {
        let p = fa(vec![vec![0.8, 0.0], vec![0.8, 0.0]]);
        assert!(matches!(decompose(&p, 1e-9), Err(Error::NotDecomposable(_))));
    }

    #[test]
    fn json_uses_minus_one_for_unmatched() {
        let l = Lottery { terms: vec![LotteryTerm { weight: 1.0, matching: vec![Some(1), None] }], residual: 0.0 };
        let s = serde_json::to_string(&l).unwrap();
        assert_eq!(s, r#"[{"weight":1.0,"matching":[1,-1]}]"#);
        let back: Lottery = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn residual_goes_to_lexicographic_first() {
        let l = Lottery {
            terms: vec![
                LotteryTerm { weight: 0.0, matching: vec![Some(1), Some(0)] },
                LotteryTerm { weight: 0.0, matching: vec![Some(0), Some(1)] },
            ],
            residual: 1.0,
        };
        assert_eq!(sample(&l, 5), vec![Some(0), Some(1)]);
    }
}
