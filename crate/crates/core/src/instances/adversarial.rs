//! Hand-built instances: the three-agent monotonicity example and the two ordinal worst cases.

use crate::error::{Error, Result};
use crate::model::Instance;

/// Agents a, b, c over items A, B, C.
pub fn table1() -> Instance {
    let labels = |s: &[&str]| s.iter().map(|x| x.to_string()).collect();
    Instance::new(vec![vec![1.0, 2.0, 0.0], vec![0.0, 2.0, 1.0], vec![0.0, 0.0, 1.0]])
        .and_then(|i| i.with_labels(labels(&["a", "b", "c"]), labels(&["A", "B", "C"])))
        .expect("static instance")
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")))
    }
}

/// Agent 0 only values item 0; agent i also values item i at `1 - eps`.
pub fn gen_rsd_worst(n: usize, eps: f64) -> Result<Instance> {
    check_eps(eps)?;
    if n == 0 {
        return Err(Error::Empty);
    }
    let values = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            row[0] = 1.0;
            if i > 0 {
                row[i] = 1.0 - eps;
            }
            row
        })
        .collect();
    Instance::new(values)
}

/// Agents `0..n-1` all rank item 0 first; the last agent values items `1..n` equally.
pub fn gen_ordinal_worst(n: usize, eps: f64) -> Result<Instance> {
    check_eps(eps)?;
    if n < 3 {
        return Err(Error::InvalidParameter(format!("need n >= 3, got {n}")));
    }
    let mut values = vec![vec![0.0; n]; n];
    values[0][0] = 1.0;
    values[0][1] = eps;
    for (i, row) in values.iter_mut().enumerate().take(n - 1).skip(1) {
        row[0] = 1.0;
        row[i + 1] = 1.0 - eps;
    }
    for j in 1..n {
        values[n - 1][j] = 1.0;
    }
    Instance::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rsd_worst_small() {
        let i = gen_rsd_worst(3, 0.25).unwrap();
        assert_eq!(i.values().to_rows(), vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.75, 0.0], vec![1.0, 0.0, 0.75]]);
        assert_eq!(gen_rsd_worst(1, 0.1).unwrap().values().to_rows(), vec![vec![1.0]]);
    }

    #[test]
    fn ordinal_worst_small() {
        let i = gen_ordinal_worst(4, 0.1).unwrap();
        assert_eq!(
            i.values().to_rows(),
            vec![
                vec![1.0, 0.1, 0.0, 0.0],
                vec![1.0, 0.0, 0.9, 0.0],
                vec![1.0, 0.0, 0.0, 0.9],
                vec![0.0, 1.0, 1.0, 1.0],
            ]
        );
    }
}
