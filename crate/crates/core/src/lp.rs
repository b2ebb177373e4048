//! Small dense two-phase simplex. Variables are nonnegative; problems here have at most a few
//! hundred rows, so a full tableau is fine.

const EPS: f64 = 1e-10;
const PIVOT_EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub(crate) struct Lp {
    n: usize,
    objective: Vec<f64>,
    rows: Vec<(Vec<(usize, f64)>, Cmp, f64)>,
}

impl Lp {
    pub fn new(n_vars: usize) -> Self {
        Lp { n: n_vars, objective: vec![0.0; n_vars], rows: Vec::new() }
    }

    pub fn set_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] = coef;
    }

    pub fn add(&mut self, coeffs: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        debug_assert!(coeffs.iter().all(|&(v, _)| v < self.n));
        self.rows.push((coeffs, cmp, rhs));
    }

    /// Maximize the objective.
    pub fn maximize(&self) -> LpOutcome {
        Tableau::build(self).run(&self.objective)
    }
}

struct Tableau {
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_struct: usize,
    n_cols: usize,
    artificial_from: usize,
}

impl Tableau {
    fn build(lp: &Lp) -> Self {
        let m = lp.rows.len();
        let n_slack = lp.rows.iter().filter(|r| r.1 != Cmp::Eq).count();
        let mut n_art = 0;
        let mut normalized = Vec::with_capacity(m);
        for (coeffs, cmp, rhs) in &lp.rows {
            let (sign, cmp) = if *rhs < 0.0 {
                let flipped = match cmp {
                    Cmp::Le => Cmp::Ge,
                    Cmp::Ge => Cmp::Le,
                    Cmp::Eq => Cmp::Eq,
                };
                (-1.0, flipped)
            } else {
                (1.0, *cmp)
            };
            if cmp != Cmp::Le {
                n_art += 1;
            }
            normalized.push((coeffs, sign, cmp, rhs * sign));
        }
        let artificial_from = lp.n + n_slack;
        let n_cols = artificial_from + n_art;
        let mut t = vec![vec![0.0; n_cols + 1]; m];
        let mut basis = vec![0; m];
        let (mut slack, mut art) = (lp.n, artificial_from);
        for (i, (coeffs, sign, cmp, rhs)) in normalized.into_iter().enumerate() {
            for &(v, a) in coeffs.iter() {
                t[i][v] += sign * a;
            }
            t[i][n_cols] = rhs;
            match cmp {
                Cmp::Le => {
                    t[i][slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Cmp::Ge => {
                    t[i][slack] = -1.0;
                    slack += 1;
                    t[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Cmp::Eq => {
                    t[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Tableau { t, basis, n_struct: lp.n, n_cols, artificial_from }
    }

    fn pivot(&mut self, obj: &mut [f64], r: usize, c: usize) {
        let p = self.t[r][c];
        for x in self.t[r].iter_mut() {
            *x /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
                row[c] = 0.0;
            }
        }
        let f = obj[c];
        if f != 0.0 {
            for (x, y) in obj.iter_mut().zip(&pivot_row) {
                *x -= f * y;
            }
            obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Reduced-cost row for maximizing `cost` given the current basis.
    fn objective_row(&self, cost: &[f64]) -> Vec<f64> {
        let mut obj = vec![0.0; self.n_cols + 1];
        obj[..cost.len()].copy_from_slice(cost);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = if b < cost.len() { cost[b] } else { 0.0 };
            if cb != 0.0 {
                for (x, y) in obj.iter_mut().zip(&self.t[i]) {
                    *x -= cb * y;
                }
            }
        }
        obj
    }

    /// Returns false if unbounded.
    fn optimize(&mut self, obj: &mut [f64], allowed: usize) -> bool {
        let rhs = self.n_cols;
        let mut pivots = 0;
        loop {
            pivots += 1;
            let bland = pivots > 5_000;
            if pivots > MAX_PIVOTS {
                return true;
            }
            let mut enter = None;
            let mut best = EPS;
            for (j, &r) in obj[..allowed].iter().enumerate() {
                if r > best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = r;
                }
            }
            let Some(c) = enter else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][c];
                if a > PIVOT_EPS {
                    let ratio = self.t[i][rhs] / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12
                                || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, _)) = leave else { return false };
            self.pivot(obj, r, c);
        }
    }

    fn run(mut self, cost: &[f64]) -> LpOutcome {
        let rhs = self.n_cols;
        if self.artificial_from < self.n_cols {
            let mut phase1 = vec![0.0; self.n_cols];
            phase1[self.artificial_from..].iter_mut().for_each(|c| *c = -1.0);
            let mut obj = self.objective_row(&phase1);
            self.optimize(&mut obj, self.n_cols);
            let infeas: f64 = self
                .basis
                .iter()
                .zip(&self.t)
                .filter(|(b, _)| **b >= self.artificial_from)
                .map(|(_, row)| row[rhs])
                .sum();
            let scale = 1.0 + self.t.iter().map(|r| r[rhs].abs()).fold(0.0, f64::max);
            if infeas > 1e-8 * scale {
                return LpOutcome::Infeasible;
            }
            // drive artificials out of the basis, dropping redundant rows
            let mut r = 0;
            while r < self.t.len() {
                if self.basis[r] >= self.artificial_from {
                    let col = (0..self.artificial_from).find(|&k| self.t[r][k].abs() > PIVOT_EPS);
                    match col {
                        Some(k) => {
                            let mut dummy = vec![0.0; self.n_cols + 1];
                            self.pivot(&mut dummy, r, k);
                        }
                        None => {
                            self.t.remove(r);
                            self.basis.remove(r);
                            continue;
                        }
                    }
                }
                r += 1;
            }
        }
        let mut obj = self.objective_row(cost);
        if !self.optimize(&mut obj, self.artificial_from) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![0.0; self.n_struct];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_struct {
                x[b] = self.t[i][rhs].max(0.0);
            }
        }
        let value = cost.iter().zip(&x).map(|(c, x)| c * x).sum();
        LpOutcome::Optimal { x, value }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(o: LpOutcome) -> (Vec<f64>, f64) {
        match o {
            LpOutcome::Optimal { x, value } => (x, value),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn textbook_max() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = Lp::new(2);
        lp.set_objective(0, 3.0);
        lp.set_objective(1, 5.0);
        lp.add(vec![(0, 1.0)], Cmp::Le, 4.0);
        lp.add(vec![(1, 2.0)], Cmp::Le, 12.0);
        lp.add(vec![(0, 3.0), (1, 2.0)], Cmp::Le, 18.0);
        let (x, v) = optimal(lp.maximize());
        assert!((v - 36.0).abs() < 1e-9);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + y (max -x - y), x + y >= 2, x - y = 1 -> x = 1.5, y = .5
        let mut lp = Lp::new(2);
        lp.set_objective(0, -1.0);
        lp.set_objective(1, -1.0);
        lp.add(vec![(0, 1.0), (1, 1.0)], Cmp::Ge, 2.0);
        lp.add(vec![(0, 1.0), (1, -1.0)], Cmp::Eq, 1.0);
        let (x, v) = optimal(lp.maximize());
        assert!((v + 2.0).abs() < 1e-9);
        assert!((x[0] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = Lp::new(1);
        lp.add(vec![(0, 1.0)], Cmp::Le, 1.0);
        lp.add(vec![(0, 1.0)], Cmp::Ge, 2.0);
        assert!(matches!(lp.maximize(), LpOutcome::Infeasible));
        let mut lp = Lp::new(1);
        lp.set_objective(0, 1.0);
        assert!(matches!(lp.maximize(), LpOutcome::Unbounded));
    }

    #[test]
    fn negative_rhs_and_redundant_rows() {
        // -x <= -1 (x >= 1), x + y = 2 twice, max y
        let mut lp = Lp::new(2);
        lp.set_objective(1, 1.0);
        lp.add(vec![(0, -1.0)], Cmp::Le, -1.0);
        lp.add(vec![(0, 1.0), (1, 1.0)], Cmp::Eq, 2.0);
        lp.add(vec![(0, 1.0), (1, 1.0)], Cmp::Eq, 2.0);
        let (x, v) = optimal(lp.maximize());
        assert!((v - 1.0).abs() < 1e-9 && (x[0] - 1.0).abs() < 1e-9);
    }
}
