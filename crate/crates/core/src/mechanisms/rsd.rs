//! Random Serial Dictatorship, exact (all orders) or sampled.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{FractionalAssignment, Instance, Matrix};

/// Largest `n` for exact enumeration.
pub const RSD_EXACT_MAX: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RsdMode {
    Exact,
    Sampled { orders: usize, seed: u64 },
}

/// Each agent's items from best to worst, ties by smallest index.
pub fn rankings(inst: &Instance) -> Vec<Vec<usize>> {
    (0..inst.n_agents())
        .map(|i| {
            let mut items: Vec<usize> = (0..inst.n_items()).collect();
            items.sort_by(|&a, &b| inst.value(i, b).total_cmp(&inst.value(i, a)).then(a.cmp(&b)));
            items
        })
        .collect()
}

fn favorite(rank: &[usize], taken: &[bool]) -> Option<usize> {
    rank.iter().copied().find(|&j| !taken[j])
}

pub fn rsd_run(inst: &Instance, mode: RsdMode) -> Result<FractionalAssignment> {
    let (n, m) = (inst.n_agents(), inst.n_items());
    let ranks = rankings(inst);
    let mut p = Matrix::zeros(n, m);
    match mode {
        RsdMode::Exact => {
            if n > RSD_EXACT_MAX {
                return Err(Error::TooLargeForExact { n, max: RSD_EXACT_MAX });
            }
            let mut counts = vec![0u64; n * m];
            let mut taken = vec![false; m];
            let mut done = vec![false; n];
            let mut picks: Vec<(usize, Option<usize>)> = Vec::with_capacity(n);
            fn dfs(
                ranks: &[Vec<usize>],
                m: usize,
                taken: &mut Vec<bool>,
                done: &mut Vec<bool>,
                picks: &mut Vec<(usize, Option<usize>)>,
                counts: &mut [u64],
            ) {
                let n = ranks.len();
                if picks.len() == n {
                    for &(i, j) in picks.iter() {
                        if let Some(j) = j {
                            counts[i * m + j] += 1;
                        }
                    }
                    return;
                }
                for i in 0..n {
                    if done[i] {
                        continue;
                    }
                    let j = favorite(&ranks[i], taken);
                    done[i] = true;
                    if let Some(j) = j {
                        taken[j] = true;
                    }
                    picks.push((i, j));
                    dfs(ranks, m, taken, done, picks, counts);
                    picks.pop();
                    if let Some(j) = j {
                        taken[j] = false;
                    }
                    done[i] = false;
                }
            }
            dfs(&ranks, m, &mut taken, &mut done, &mut picks, &mut counts);
            let orders: u64 = (1..=n as u64).product();
            for i in 0..n {
                for j in 0..m {
                    p[(i, j)] = counts[i * m + j] as f64 / orders as f64;
                }
            }
        }
        RsdMode::Sampled { orders, seed } => {
            if orders == 0 {
                return Err(Error::InvalidParameter("need at least one order".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..n).collect();
            let mut counts = vec![0u64; n * m];
            for _ in 0..orders {
                order.shuffle(&mut rng);
                let mut taken = vec![false; m];
                for &i in &order {
                    if let Some(j) = favorite(&ranks[i], &taken) {
                        taken[j] = true;
                        counts[i * m + j] += 1;
                    }
                }
            }
            for i in 0..n {
                for j in 0..m {
                    p[(i, j)] = counts[i * m + j] as f64 / orders as f64;
                }
            }
        }
    }
    Ok(FractionalAssignment::from_matrix(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_values_give_identity() {
        let inst = Instance::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(rsd_run(&inst, RsdMode::Exact).unwrap().probs, Matrix::identity(3));
    }

    #[test]
    fn two_agents_same_favorite() {
        let inst = Instance::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let p = rsd_run(&inst, RsdMode::Exact).unwrap();
        assert_eq!(p.probs.to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
    }

    #[test]
    fn exact_refuses_large_n() {
        let inst = Instance::new(vec![vec![1.0; 11]; 11]).unwrap();
        assert!(matches!(rsd_run(&inst, RsdMode::Exact), Err(Error::TooLargeForExact { n: 11, .. })));
    }

    #[test]
    fn sampled_rows_are_unit() {
        let inst = Instance::new(vec![vec![3.0, 1.0, 2.0], vec![1.0, 2.0, 3.0], vec![1.0, 1.0, 1.0]]).unwrap();
        let p = rsd_run(&inst, RsdMode::Sampled { orders: 100, seed: 4 }).unwrap();
        assert!(p.probs.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-12));
    }
}
