//! Where the cardinal guarantee `4 e 2^(2 sqrt(log2 n))` drops below the ordinal bound `n - 1`.

use serde::{Deserialize, Serialize};

/// `log2(4 e 2^(2 sqrt(log2 n)))`.
pub fn log2_cardinal_bound(n: u64) -> f64 {
    (4.0 * std::f64::consts::E).log2() + 2.0 * (n as f64).log2().sqrt()
}

/// `log2(n - 1)`.
pub fn log2_ordinal_bound(n: u64) -> f64 {
    ((n - 1) as f64).log2()
}

/// Cardinal bound strictly below `n - 1`.
pub fn cardinal_wins(n: u64) -> bool {
    n >= 2 && log2_cardinal_bound(n) < log2_ordinal_bound(n)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossoverReport {
    /// Smallest `n` from which the cardinal bound stays below `n - 1`.
    pub crossover: u64,
    /// `n` values checked at or beyond the crossover.
    pub checked: usize,
    /// Every checked point up to `2^64 - 1` agreed.
    pub holds: bool,
    /// First checked point where it failed, if any.
    pub counterexample: Option<u64>,
    /// Bound ratio `cardinal / (n - 1)` at `2^64 - 1`.
    pub ratio_at_max: f64,
}

pub fn crossover() -> CrossoverReport {
    // the log-gap L - 2 sqrt(L) grows for L > 1, so the predicate flips once
    let (mut lo, mut hi) = (2u64, u64::MAX);
    debug_assert!(!cardinal_wins(lo) && cardinal_wins(hi));
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if cardinal_wins(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let crossover = hi;
    let mut points: Vec<u64> = (crossover..crossover + 100_000).collect();
    for k in 0..64u32 {
        for i in 0..256u64 {
            let base = 1u64 << k;
            let n = base.saturating_add((base / 256).saturating_mul(i));
            if n >= crossover {
                points.push(n);
            }
        }
    }
    points.extend([u64::MAX, u64::MAX - 1, 1 << 63]);
    let counterexample = points.iter().copied().find(|&n| !cardinal_wins(n));
    let ratio_at_max = (log2_cardinal_bound(u64::MAX) - log2_ordinal_bound(u64::MAX)).exp2();
    CrossoverReport { crossover, checked: points.len(), holds: counterexample.is_none(), counterexample, ratio_at_max }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossover_is_near_eight_hundred() {
        let r = crossover();
        assert!(r.holds);
        assert!((700..900).contains(&r.crossover), "{}", r.crossover);
        assert!(!cardinal_wins(r.crossover - 1));
        assert!(r.ratio_at_max < 1e-10);
    }
}
