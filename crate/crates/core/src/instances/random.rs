//! Seeded random instances and random doubly stochastic matrices.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueDistribution {
    Uniform01,
    /// Values drawn from `{0, 1/k, ..., 1}`.
    Grid(u32),
    /// Uniform01 entries, each zeroed with probability `p`.
    Sparse(f64),
}

/// Independent seed for the `index`-th job of a run seeded with `seed`.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

pub fn gen_random(n: usize, dist: ValueDistribution, seed: u64) -> Result<Instance> {
    if n == 0 {
        return Err(Error::Empty);
    }
    match dist {
        ValueDistribution::Grid(0) => return Err(Error::InvalidParameter("grid needs k >= 1".into())),
        ValueDistribution::Sparse(p) if !(0.0..=1.0).contains(&p) => {
            return Err(Error::InvalidParameter(format!("sparsity {p} outside [0, 1]")))
        }
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| match dist {
                    ValueDistribution::Uniform01 => rng.gen::<f64>(),
                    ValueDistribution::Grid(k) => rng.gen_range(0..=k) as f64 / k as f64,
                    ValueDistribution::Sparse(p) => {
                        let zero = rng.gen::<f64>() < p;
                        let v = rng.gen::<f64>();
                        if zero {
                            0.0
                        } else {
                            v
                        }
                    }
                })
                .collect()
        })
        .collect();
    Instance::new(values)
}

/// Scale rows and columns alternately until both sum to 1 within `tol`.
pub fn sinkhorn(mut a: Matrix, tol: f64, max_rounds: usize) -> Result<Matrix> {
    if a.rows() != a.cols() {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", a.rows(), a.cols())));
    }
    for _ in 0..max_rounds {
        for (i, s) in a.row_sums().into_iter().enumerate() {
            if s <= 0.0 {
                return Err(Error::InvalidParameter(format!("row {i} has no support")));
            }
            a.row_mut(i).iter_mut().for_each(|x| *x /= s);
        }
        let cols = a.col_sums();
        for i in 0..a.rows() {
            for (x, s) in a.row_mut(i).iter_mut().zip(&cols) {
                *x /= s;
            }
        }
        let err = a.row_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
        if err <= tol {
            return Ok(a);
        }
    }
    Err(Error::NoConvergence { iterations: max_rounds, best_residual: f64::NAN })
}

/// Random doubly stochastic matrix: a random convex combination of `max(1, round(density * n))`
/// random permutation matrices.
pub fn random_doubly_stochastic(n: usize, density: f64, seed: u64) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidParameter(format!("density {density} not in [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = ((density * n as f64).round() as usize).max(1);
    let weights: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    let mut a = Matrix::zeros(n, n);
    for w in weights {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        for (i, &j) in perm.iter().enumerate() {
            a[(i, j)] += w / total;
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible() {
        let a = gen_random(3, ValueDistribution::Grid(2), 7).unwrap();
        assert_eq!(a, gen_random(3, ValueDistribution::Grid(2), 7).unwrap());
        assert!(a.values().as_slice().iter().all(|v| [0.0, 0.5, 1.0].contains(v)));
    }

    #[test]
    fn split_seeds_differ() {
        assert_ne!(split_seed(1, 0), split_seed(1, 1));
        assert_eq!(split_seed(1, 5), split_seed(1, 5));
    }

    #[test]
    fn sinkhorn_balances() {
        let m = random_doubly_stochastic(6, 0.5, 3).unwrap();
        assert!(m.row_sums().iter().chain(&m.col_sums()).all(|s| (s - 1.0).abs() < 1e-12));
    }
}
