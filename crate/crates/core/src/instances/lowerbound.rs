//! The layered lower-bound market for utility monotonicity: exact parameters, the aggregated
//! (sized) market with both claimed equilibria, and their KKT certificates.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model::Instance;

pub type Rational = BigRational;

fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(n.into(), d.into())
}

fn int(x: &BigInt) -> Rational {
    BigRational::from_integer(x.clone())
}

fn floor(x: &Rational) -> BigInt {
    x.floor().to_integer()
}

fn ceil(x: &Rational) -> BigInt {
    x.ceil().to_integer()
}

fn pow(x: &Rational, e: usize) -> Rational {
    (0..e).fold(Rational::one(), |acc, _| acc * x)
}

pub fn rational_to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn rstr(x: &Rational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `v_r < 9/2`
    Low,
    /// `v_r > 9/2`
    High,
}

/// How `s_f` (and with it `s_a`) is computed below `v_r = 9/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SfRule {
    /// The displayed per-regime closed forms.
    ClosedForm,
    /// `floor(16v/9) s_b + floor(4v/9) s_c` in both regimes.
    Derived,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelParams {
    pub r: usize,
    pub v: Rational,
    pub regime: Regime,
    pub s_a: BigInt,
    pub s_b: BigInt,
    pub s_c: BigInt,
    pub s_d: BigInt,
    pub s_f: BigInt,
    pub s_g: BigInt,
    pub s_h: BigInt,
    /// Number of copies of this level.
    pub k: BigInt,
    pub vi_f: Rational,
    pub vi_g: Rational,
    pub vi_h: Rational,
    pub vf_f: Rational,
    pub vf_g: Rational,
    pub vf_h: Rational,
}

impl LevelParams {
    fn new(r: usize, rule: SfRule) -> Self {
        let v = rat(2, 1) * pow(&rat(9, 8), r);
        let w = floor(&(&v / rat(14, 1)));
        let w1 = &w + 1;
        let s_h = BigInt::from(14) * &w + 13;
        let s_d = BigInt::from(9) * &w1;
        let s_b = BigInt::from(5) * &w1;
        let regime = if v > rat(9, 2) { Regime::High } else { Regime::Low };
        let f16 = floor(&(rat(16, 9) * &v));
        let f4 = floor(&(rat(4, 9) * &v));
        let f2 = floor(&(rat(2, 9) * &v));
        let (s_g, s_c, closed_f, closed_a) = match regime {
            Regime::High => {
                let s_g = BigInt::from(9) * &f2 * &w1;
                let s_c = BigInt::from(9) * &w1 * (&f2 + 1);
                let s_f = BigInt::from(5) * &f16 * &w1 + BigInt::from(9) * &f4 * &w1 * (&f2 + 1);
                let s_a = BigInt::from(5) * &w1
                    + BigInt::from(9) * &w1 * (&f2 + 1)
                    + BigInt::from(5) * &f16 * &w1
                    + BigInt::from(9) * &f4 * &w1 * (&f2 + 1);
                (s_g, s_c, s_f, s_a)
            }
            Regime::Low => {
                let g = ceil(&((rat(9, 1) - rat(2, 1) * &v) / (rat(2, 3) * &v - rat(1, 1))));
                let s_c = BigInt::from(9) + &g;
                let s_f = BigInt::from(5) * &f16 * &w1;
                let s_a = BigInt::from(14) + &g + BigInt::from(5) * &f16;
                (g, s_c, s_f, s_a)
            }
        };
        let (s_f, s_a) = match rule {
            SfRule::ClosedForm => (closed_f, closed_a),
            SfRule::Derived => {
                let s_f = &f16 * &s_b + &f4 * &s_c;
                let s_a = &s_b + &s_f + &s_c;
                (s_f, s_a)
            }
        };
        let vf_h = (int(&s_h) + Rational::one() - &v) / int(&s_h);
        let vf_g = (int(&s_g) + int(&s_d) - rat(2, 9) * &v * int(&s_d)) / int(&s_g);
        let vf_f = (int(&s_f) + int(&s_b) + int(&s_c) - rat(16, 9) * &v * int(&s_b) - rat(4, 9) * &v * int(&s_c))
            / int(&s_f);
        let vi_h = rat(9, 7) / &v * &vf_h;
        let vi_g = rat(9, 4) / &v * &vf_g;
        let vi_f = rat(9, 8) / &v * &vf_f;
        LevelParams {
            r,
            v,
            regime,
            s_a,
            s_b,
            s_c,
            s_d,
            s_f,
            s_g,
            s_h,
            k: BigInt::one(),
            vi_f,
            vi_g,
            vi_h,
            vf_f,
            vf_g,
            vf_h,
        }
    }

    /// Bidders in one copy of this level, counting `a_r` but not the extra agents of the last level.
    pub fn bidders_per_copy(&self) -> BigInt {
        &self.s_a + &self.s_b + &self.s_c + &self.s_d + &self.s_f + &self.s_g + &self.s_h
    }
}

/// Bidders in one copy of the base market, excluding `h_0` (counted as `a_1`).
pub const BASE_BIDDERS: u32 = 18_739;

#[derive(Clone, Debug, PartialEq)]
pub struct LowerBoundParams {
    pub s: usize,
    pub rule: SfRule,
    /// Levels `1..=s`.
    pub levels: Vec<LevelParams>,
    pub k0: BigInt,
    pub n_agents: BigInt,
}

impl LowerBoundParams {
    pub fn new(s: usize) -> Result<Self> {
        Self::with_rule(s, SfRule::ClosedForm)
    }

    pub fn with_rule(s: usize, rule: SfRule) -> Result<Self> {
        if s == 0 {
            return Err(Error::InvalidParameter("depth s must be at least 1".into()));
        }
        let mut levels: Vec<LevelParams> = (1..=s).map(|r| LevelParams::new(r, rule)).collect();
        let mut k = BigInt::one();
        for lvl in levels.iter_mut().rev() {
            lvl.k = k.clone();
            k *= &lvl.s_a;
        }
        let k0 = k;
        let mut n_agents = &k0 * BigInt::from(BASE_BIDDERS) + 2;
        for lvl in &levels {
            n_agents += &lvl.k * lvl.bidders_per_copy();
        }
        Ok(LowerBoundParams { s, rule, levels, k0, n_agents })
    }

    pub fn level(&self, r: usize) -> &LevelParams {
        &self.levels[r - 1]
    }

    pub fn v_s(&self) -> &Rational {
        &self.levels[self.s - 1].v
    }

    /// Violated size identities, one message each.
    pub fn identity_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for l in &self.levels {
            let r = l.r;
            if l.s_a != &l.s_b + &l.s_f + &l.s_c {
                out.push(format!("r={r}: s_a != s_b + s_f + s_c"));
            }
            if l.s_c != &l.s_d + &l.s_g {
                out.push(format!("r={r}: s_c != s_d + s_g"));
            }
            if &l.s_b + &l.s_d != &l.s_h + 1 {
                out.push(format!("r={r}: s_b + s_d != 1 + s_h"));
            }
            if !((&l.s_h + 1u32) % BigInt::from(14)).is_zero() {
                out.push(format!("r={r}: 1 + s_h not divisible by 14"));
            }
            for (name, x) in [
                ("s_a", &l.s_a),
                ("s_b", &l.s_b),
                ("s_c", &l.s_c),
                ("s_d", &l.s_d),
                ("s_f", &l.s_f),
                ("s_g", &l.s_g),
                ("s_h", &l.s_h),
            ] {
                if !x.is_positive() {
                    out.push(format!("r={r}: {name} = {x} is not positive"));
                }
            }
            let expect_v = rat(2, 1) * pow(&rat(9, 8), r);
            if l.v != expect_v {
                out.push(format!("r={r}: v_r != 2 (9/8)^r"));
            }
            let next_k = self.levels.get(r).map_or(BigInt::one(), |n| &n.s_a * &n.k);
            if l.k != next_k {
                out.push(format!("r={r}: k_r != s_(a,r+1) k_(r+1)"));
            }
        }
        if self.k0 != &self.levels[0].s_a * &self.levels[0].k {
            out.push("k_0 != s_(a,1) k_1".into());
        }
        out
    }

    /// Auxiliary values that make some valuation negative or break an initial-equilibrium cap.
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        for l in &self.levels {
            for (name, x) in [("vF_f", &l.vf_f), ("vF_g", &l.vf_g), ("vF_h", &l.vf_h)] {
                if !x.is_positive() {
                    out.push(format!("r={}: {name} = {} is not positive", l.r, rstr(x)));
                }
            }
            for (name, x, cap) in [("vI_f", &l.vi_f, rat(1, 1)), ("vI_g", &l.vi_g, rat(3, 2)), ("vI_h", &l.vi_h, rat(9, 7))] {
                if *x > cap {
                    out.push(format!("r={}: {name} = {} exceeds {}", l.r, rstr(x), rstr(&cap)));
                }
            }
        }
        out
    }

    /// `s_a <= 2 v^3` above 9/2 and `<= 4 v^3` below, per level.
    pub fn size_bound_violations(&self) -> Vec<usize> {
        self.levels
            .iter()
            .filter(|l| {
                let c = if l.regime == Regime::High { 2 } else { 4 };
                int(&l.s_a) > rat(c, 1) * pow(&l.v, 3)
            })
            .map(|l| l.r)
            .collect()
    }

    /// `k_0 <= prod_r 4 v_r^3`.
    pub fn k0_within_product_bound(&self) -> bool {
        let bound = self.levels.iter().fold(Rational::one(), |acc, l| acc * rat(4, 1) * pow(&l.v, 3));
        int(&self.k0) <= bound
    }

    /// `k_0 <= (9/8)^((s^2 + 58 s) / 2)`, compared exactly by squaring.
    pub fn k0_within_closed_bound(&self) -> bool {
        let e = self.s * self.s + 58 * self.s;
        int(&self.k0) * int(&self.k0) <= pow(&rat(9, 8), e)
    }

    /// `(9/8)^((s^2 + 58 s) / 2)` as a float, for reporting.
    pub fn closed_bound_f64(&self) -> f64 {
        (9.0f64 / 8.0).powf((self.s * self.s + 58 * self.s) as f64 / 2.0)
    }

    pub fn to_json(&self) -> Value {
        let levels: Vec<Value> = self
            .levels
            .iter()
            .map(|l| {
                json!({
                    "r": l.r,
                    "v": rstr(&l.v),
                    "regime": l.regime,
                    "s_a": l.s_a.to_string(), "s_b": l.s_b.to_string(), "s_c": l.s_c.to_string(),
                    "s_d": l.s_d.to_string(), "s_f": l.s_f.to_string(), "s_g": l.s_g.to_string(),
                    "s_h": l.s_h.to_string(), "k": l.k.to_string(),
                    "vI_f": rstr(&l.vi_f), "vI_g": rstr(&l.vi_g), "vI_h": rstr(&l.vi_h),
                    "vF_f": rstr(&l.vf_f), "vF_g": rstr(&l.vf_g), "vF_h": rstr(&l.vf_h),
                })
            })
            .collect();
        json!({
            "s": self.s,
            "rule": self.rule,
            "k0": self.k0.to_string(),
            "n_agents": self.n_agents.to_string(),
            "levels": levels,
            "identity_violations": self.identity_violations(),
            "issues": self.issues(),
        })
    }
}

/// Which printed table a bidder or item belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableId {
    /// The base market `M_0`.
    Base,
    /// An intermediate level `M_r`, `1 <= r < s`.
    Level(usize),
    /// The last level `M_s` with the loser.
    Last,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equilibrium {
    Initial,
    Final,
}

/// One claimed equilibrium of the sized market, in exact arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumData {
    pub present: Vec<bool>,
    /// Printed normalized values (per bidder type).
    pub values: Vec<Vec<Rational>>,
    /// Units of item type `j` held by bidder type `i` in total.
    pub units: Vec<Vec<Rational>>,
    pub t: Vec<Rational>,
    pub q: Vec<Rational>,
}

impl EquilibriumData {
    fn new(na: usize, nm: usize) -> Self {
        EquilibriumData {
            present: vec![true; na],
            values: vec![vec![Rational::zero(); nm]; na],
            units: vec![vec![Rational::zero(); nm]; na],
            t: vec![Rational::zero(); nm],
            q: vec![Rational::zero(); na],
        }
    }
}

/// The market with bidder and item types carrying integer sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct SizedMarket {
    pub agent_labels: Vec<String>,
    pub item_labels: Vec<String>,
    pub agent_sizes: Vec<BigInt>,
    pub item_sizes: Vec<BigInt>,
    pub agent_tables: Vec<Vec<TableId>>,
    pub item_tables: Vec<Vec<TableId>>,
    /// Instance valuations (the initial normalization).
    pub values: Vec<Vec<Rational>>,
    pub initial: EquilibriumData,
    pub final_eq: EquilibriumData,
    pub removal_set: Vec<usize>,
    pub loser: usize,
    /// Entries two tables disagree on while describing the same bidder or item.
    pub conflicts: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairResidual {
    pub bidder: String,
    pub item: String,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertReport {
    pub table: TableId,
    pub equilibrium: Equilibrium,
    pub residual: f64,
    /// The maximum residual as an exact fraction.
    pub exact: String,
    pub pairs: Vec<PairResidual>,
    /// Per-bidder and per-item conditions (signs, complementary slackness, normalization).
    pub conditions: BTreeMap<String, f64>,
}

struct Builder {
    na: usize,
    nm: usize,
    agents: Vec<(String, BigInt, Vec<TableId>)>,
    items: Vec<(String, BigInt, Vec<TableId>)>,
    // (equilibrium, agent, item) -> value, etc.
    vals: BTreeMap<(u8, usize, usize), Rational>,
    units: BTreeMap<(u8, usize, usize), Rational>,
    t: BTreeMap<(u8, usize), Rational>,
    q: BTreeMap<(u8, usize), Rational>,
    absent: Vec<usize>,
    conflicts: Vec<String>,
}

const INI: u8 = 0;
const FIN: u8 = 1;

impl Builder {
    fn agent(&mut self, label: String, size: BigInt, table: TableId) -> usize {
        self.agents.push((label, size, vec![table]));
        self.na += 1;
        self.na - 1
    }

    fn item(&mut self, label: String, size: BigInt, table: TableId) -> usize {
        self.items.push((label, size, vec![table]));
        self.nm += 1;
        self.nm - 1
    }

    fn put<K: Ord + Copy + std::fmt::Debug>(
        map: &mut BTreeMap<K, Rational>,
        conflicts: &mut Vec<String>,
        key: K,
        val: Rational,
    ) {
        if let Some(old) = map.get(&key) {
            if *old != val {
                conflicts.push(format!("{key:?}: {} vs {}", rstr(old), rstr(&val)));
            }
        } else {
            map.insert(key, val);
        }
    }

    fn val(&mut self, eq: u8, i: usize, j: usize, v: Rational) {
        Self::put(&mut self.vals, &mut self.conflicts, (eq, i, j), v);
    }

    fn unit(&mut self, eq: u8, i: usize, j: usize, v: Rational) {
        Self::put(&mut self.units, &mut self.conflicts, (eq, i, j), v);
    }

    fn price(&mut self, eq: u8, j: usize, v: Rational) {
        Self::put(&mut self.t, &mut self.conflicts, (eq, j), v);
    }

    fn agent_price(&mut self, eq: u8, i: usize, v: Rational) {
        Self::put(&mut self.q, &mut self.conflicts, (eq, i), v);
    }

    fn finish(self, loser: usize) -> SizedMarket {
        let (na, nm) = (self.na, self.nm);
        let mut eqs = [EquilibriumData::new(na, nm), EquilibriumData::new(na, nm)];
        for ((e, i, j), v) in self.vals {
            eqs[e as usize].values[i][j] = v;
        }
        for ((e, i, j), v) in self.units {
            eqs[e as usize].units[i][j] = v;
        }
        for ((e, j), v) in self.t {
            eqs[e as usize].t[j] = v;
        }
        for ((e, i), v) in self.q {
            eqs[e as usize].q[i] = v;
        }
        for &i in &self.absent {
            eqs[1].present[i] = false;
        }
        let [initial, final_eq] = eqs;
        let mut removal_set = self.absent.clone();
        removal_set.sort_unstable();
        SizedMarket {
            agent_labels: self.agents.iter().map(|a| a.0.clone()).collect(),
            item_labels: self.items.iter().map(|a| a.0.clone()).collect(),
            agent_sizes: self.agents.iter().map(|a| a.1.clone()).collect(),
            item_sizes: self.items.iter().map(|a| a.1.clone()).collect(),
            agent_tables: self.agents.into_iter().map(|a| a.2).collect(),
            item_tables: self.items.into_iter().map(|a| a.2).collect(),
            values: initial.values.clone(),
            initial,
            final_eq,
            removal_set,
            loser,
            conflicts: self.conflicts,
        }
    }
}

/// The aggregated market for `params`, one type per bidder/item class with multiplicities.
pub fn build_market(params: &LowerBoundParams) -> SizedMarket {
    let mut b = Builder {
        na: 0,
        nm: 0,
        agents: Vec::new(),
        items: Vec::new(),
        vals: BTreeMap::new(),
        units: BTreeMap::new(),
        t: BTreeMap::new(),
        q: BTreeMap::new(),
        absent: Vec::new(),
        conflicts: Vec::new(),
    };
    let s = params.s;
    let table_of = |r: usize| if r == s { TableId::Last } else { TableId::Level(r) };
    let k0 = params.k0.clone();
    let sized = |n: i64| BigInt::from(n) * &k0;
    let base = TableId::Base;

    // base market
    let it: Vec<usize> = [("A_0", 17000), ("B_0", 850), ("C_0", 816), ("D_0", 34), ("E_0", 33), ("F_0", 1), ("G_0", 5), ("H_0=A_1", 1)]
        .iter()
        .map(|(l, n)| b.item(l.to_string(), sized(*n), base))
        .collect();
    let ag: Vec<usize> = [("a_0", 17000), ("b_0", 850), ("c_0", 816), ("d_0", 34), ("e_0", 33), ("f_0", 6), ("h_0=a_1", 1)]
        .iter()
        .map(|(l, n)| b.agent(l.to_string(), sized(*n), base))
        .collect();
    let (a0, b0, c0, d0, e0, f0, h0) = (ag[0], ag[1], ag[2], ag[3], ag[4], ag[5], ag[6]);
    let (ia, ib, ic, id, ie, if_, ig, ih) = (it[0], it[1], it[2], it[3], it[4], it[5], it[6], it[7]);
    for (i, j, v) in [
        (a0, ia, rat(1, 1)),
        (a0, ib, rat(3, 2)),
        (b0, ib, rat(1, 1)),
        (b0, ic, rat(4687, 7008)),
        (b0, id, rat(3, 2)),
        (c0, ic, rat(1, 1)),
        (d0, id, rat(1, 1)),
        (d0, ie, rat(5, 11)),
        (d0, if_, rat(2, 1)),
        (e0, ie, rat(1, 1)),
        (f0, if_, rat(8, 3)),
        (f0, ig, rat(2, 3)),
        (f0, ih, rat(5, 3)),
        (h0, ih, rat(1, 1)),
    ] {
        b.val(INI, i, j, v);
    }
    for (j, v) in [ia, ib, ic, id, ie, if_, ig, ih].into_iter().zip([rat(0, 1), rat(1, 2), rat(1, 1), rat(1, 1), rat(1, 1), rat(2, 1), rat(0, 1), rat(1, 1)]) {
        b.price(INI, j, v);
    }
    for (i, v) in [(a0, rat(1, 1)), (b0, rat(1, 2)), (c0, rat(0, 1)), (d0, rat(0, 1)), (e0, rat(0, 1)), (f0, rat(2, 3)), (h0, rat(0, 1))] {
        b.agent_price(INI, i, v);
    }
    for (i, j, n) in [(a0, ia, 17000), (b0, ib, 850), (c0, ic, 816), (d0, id, 34), (e0, ie, 33), (f0, if_, 1), (f0, ig, 5), (h0, ih, 1)] {
        b.unit(INI, i, j, int(&sized(n)));
    }
    for (i, j, v) in [
        (a0, ia, rat(40, 41)),
        (a0, ib, rat(60, 41)),
        (b0, ib, rat(292, 205)),
        (b0, ic, rat(4687, 4920)),
        (b0, id, rat(438, 205)),
        (d0, id, rat(2, 1)),
        (d0, ie, rat(10, 11)),
        (d0, if_, rat(4, 1)),
        (f0, if_, rat(16, 5)),
        (f0, ig, rat(4, 5)),
        (f0, ih, rat(2, 1)),
        (h0, ih, rat(2, 1)),
    ] {
        b.val(FIN, i, j, v);
    }
    for (j, v) in [ia, ib, ic, id, ie, if_, ig, ih].into_iter().zip([
        rat(0, 1),
        rat(20, 41),
        rat(79, 4920),
        rat(6, 5),
        rat(6, 55),
        rat(16, 5),
        rat(4, 5),
        rat(2, 1),
    ]) {
        b.price(FIN, j, v);
    }
    for (i, v) in [(a0, rat(40, 41)), (b0, rat(192, 205)), (d0, rat(4, 5)), (f0, rat(0, 1)), (h0, rat(0, 1))] {
        b.agent_price(FIN, i, v);
    }
    for (i, j, n) in [(a0, ia, 16150), (a0, ib, 850), (b0, ic, 816), (b0, id, 34), (d0, ie, 33), (d0, if_, 1), (f0, ig, 5), (f0, ih, 1)] {
        b.unit(FIN, i, j, int(&sized(n)));
    }
    b.absent.extend([c0, e0]);

    // levels 1..=s; `prev_e` is the item A_r (H_0 or E_(r-1)), `prev_a` the bidder a_1 = h_0
    let mut prev_e = ih;
    let mut loser = usize::MAX;
    for l in &params.levels {
        let r = l.r;
        let tab = table_of(r);
        let k = &l.k;
        let v = &l.v;
        let z = |x: &BigInt| x * k;
        let ia = prev_e;
        b.items[ia].2.push(tab);
        let ib = b.item(format!("B_{r}"), z(&l.s_b), tab);
        let ic = b.item(format!("C_{r}"), z(&l.s_c), tab);
        let id = b.item(format!("D_{r}"), z(&l.s_d), tab);
        let e_label = if r == s { format!("E_{r}") } else { format!("E_{r}=A_{}", r + 1) };
        let ie = b.item(e_label, k.clone(), tab);
        let if_ = b.item(format!("F_{r}"), z(&l.s_f), tab);
        let ig = b.item(format!("G_{r}"), z(&l.s_g), tab);
        let ih = b.item(format!("H_{r}"), z(&l.s_h), tab);
        let aa = if r == 1 {
            b.agents[h0].2.push(tab);
            h0
        } else {
            b.agent(format!("a_{r}"), z(&l.s_a), tab)
        };
        let ab = b.agent(format!("b_{r}"), z(&(&l.s_b + &l.s_d)), tab);
        let ac = b.agent(format!("c_{r}"), z(&l.s_c), tab);
        let af = b.agent(format!("f_{r}"), z(&l.s_f), tab);
        let agg = b.agent(format!("g_{r}"), z(&l.s_g), tab);
        let ah = b.agent(format!("h_{r}"), z(&l.s_h), tab);
        let one = rat(1, 1);
        for (i, j, x) in [
            (aa, ia, one.clone()),
            (aa, ib, rat(2, 1)),
            (aa, ic, rat(1, 2)),
            (aa, if_, l.vi_f.clone()),
            (ab, ib, rat(16, 7)),
            (ab, id, rat(2, 7)),
            (ab, ie, rat(9, 7)),
            (ab, ih, l.vi_h.clone()),
            (ac, ic, one.clone()),
            (ac, id, rat(1, 2)),
            (ac, ig, l.vi_g.clone()),
            (af, if_, one.clone()),
            (agg, ig, one.clone()),
            (ah, ih, one.clone()),
        ] {
            b.val(INI, i, j, x);
        }
        for (j, x) in [(ia, 1), (ib, 2), (id, 0), (ie, 1), (if_, 1), (ig, 1), (ih, 1)] {
            b.price(INI, j, rat(x, 1));
        }
        b.price(INI, ic, rat(1, 2));
        for (i, x) in [(aa, rat(0, 1)), (ab, rat(2, 7)), (ac, rat(1, 2)), (af, rat(0, 1)), (agg, rat(0, 1)), (ah, rat(0, 1))] {
            b.agent_price(INI, i, x);
        }
        for (i, j, n) in [(aa, ia, &l.s_a), (ab, ib, &l.s_b), (ab, id, &l.s_d), (ac, ic, &l.s_c), (af, if_, &l.s_f), (agg, ig, &l.s_g), (ah, ih, &l.s_h)] {
            b.unit(INI, i, j, int(&z(n)));
        }
        let nv = |a: i64, d: i64| rat(a, d) * v;
        for (i, j, x) in [
            (aa, ia, nv(8, 9)),
            (aa, ib, nv(16, 9)),
            (aa, ic, nv(4, 9)),
            (aa, if_, l.vf_f.clone()),
            (ab, ib, nv(16, 9)),
            (ab, id, nv(2, 9)),
            (ab, ie, v.clone()),
            (ab, ih, l.vf_h.clone()),
            (ac, ic, nv(4, 9)),
            (ac, id, nv(2, 9)),
            (ac, ig, l.vf_g.clone()),
        ] {
            b.val(FIN, i, j, x);
        }
        for (j, x) in [
            (ia, nv(8, 9)),
            (ib, nv(16, 9)),
            (ic, nv(4, 9)),
            (id, nv(2, 9)),
            (ie, v.clone()),
            (if_, l.vf_f.clone()),
            (ig, l.vf_g.clone()),
            (ih, l.vf_h.clone()),
        ] {
            b.price(FIN, j, x);
        }
        for i in [aa, ab, ac] {
            b.agent_price(FIN, i, rat(0, 1));
        }
        for (i, j, n) in [(aa, ib, &l.s_b), (aa, ic, &l.s_c), (aa, if_, &l.s_f), (ab, ih, &l.s_h), (ac, id, &l.s_d), (ac, ig, &l.s_g)] {
            b.unit(FIN, i, j, int(&z(n)));
        }
        b.unit(FIN, ab, ie, int(k));
        b.absent.extend([af, agg, ah]);
        if r == s {
            let ii = b.item(format!("I_{r}"), BigInt::one(), tab);
            let es = b.agent(format!("e_{r}"), BigInt::one(), tab);
            let is = b.agent(format!("i_{r}"), BigInt::one(), tab);
            b.val(INI, es, ie, one.clone());
            b.val(INI, es, ii, one.clone() / (v + &one));
            b.val(INI, is, ii, one.clone());
            b.price(INI, ii, one.clone());
            b.agent_price(INI, es, rat(0, 1));
            b.agent_price(INI, is, rat(0, 1));
            b.unit(INI, es, ie, one.clone());
            b.unit(INI, is, ii, one.clone());
            b.val(FIN, es, ie, v + &one);
            b.val(FIN, es, ii, one.clone());
            b.price(FIN, ii, rat(0, 1));
            b.agent_price(FIN, es, one.clone());
            b.unit(FIN, es, ii, one.clone());
            b.absent.push(is);
            loser = es;
        }
        prev_e = ie;
    }
    b.finish(loser)
}

impl SizedMarket {
    pub fn n_types(&self) -> (usize, usize) {
        (self.agent_labels.len(), self.item_labels.len())
    }

    pub fn total_agents(&self) -> BigInt {
        self.agent_sizes.iter().sum()
    }

    pub fn total_items(&self) -> BigInt {
        self.item_sizes.iter().sum()
    }

    pub fn equilibrium(&self, eq: Equilibrium) -> &EquilibriumData {
        match eq {
            Equilibrium::Initial => &self.initial,
            Equilibrium::Final => &self.final_eq,
        }
    }

    /// Per-unit utility of bidder `i`, measured in the instance valuations.
    pub fn utility(&self, eq: Equilibrium, i: usize) -> Rational {
        let e = self.equilibrium(eq);
        let total: Rational = (0..self.item_labels.len()).map(|j| &self.values[i][j] * &e.units[i][j]).sum();
        total / int(&self.agent_sizes[i])
    }

    /// Initial over final utility of the loser, in the instance valuations.
    pub fn loser_ratio(&self) -> Rational {
        self.utility(Equilibrium::Initial, self.loser) / self.utility(Equilibrium::Final, self.loser)
    }

    /// Final printed rows divided by the instance rows, per present bidder; `None` if a row is not a
    /// constant multiple.
    pub fn final_scale(&self, i: usize) -> Option<Rational> {
        let mut scale: Option<Rational> = None;
        for j in 0..self.item_labels.len() {
            let (a, b) = (&self.values[i][j], &self.final_eq.values[i][j]);
            if a.is_zero() {
                if !b.is_zero() {
                    return None;
                }
                continue;
            }
            let f = b / a;
            match &scale {
                None => scale = Some(f),
                Some(s) if *s != f => return None,
                _ => {}
            }
        }
        scale
    }

    /// KKT residuals for one table in one equilibrium, computed exactly on the sized market.
    pub fn certify(&self, table: TableId, eq: Equilibrium) -> CertReport {
        let e = self.equilibrium(eq);
        let (na, nm) = self.n_types();
        let agents: Vec<usize> = (0..na).filter(|&i| e.present[i] && self.agent_tables[i].contains(&table)).collect();
        let items: Vec<usize> = (0..nm).filter(|&j| self.item_tables[j].contains(&table)).collect();
        let mut worst = Rational::zero();
        let mut pairs = Vec::new();
        let mut conditions = BTreeMap::new();
        let mut note = |key: String, r: Rational, worst: &mut Rational| {
            if r > *worst {
                *worst = r.clone();
            }
            conditions.insert(key, rational_to_f64(&r));
        };
        for &i in &agents {
            for &j in &items {
                let gap = &e.values[i][j] - &e.t[j] - &e.q[i];
                let r = if e.units[i][j].is_positive() { gap.abs() } else { gap.max(Rational::zero()) };
                if r > worst {
                    worst = r.clone();
                }
                pairs.push(PairResidual {
                    bidder: self.agent_labels[i].clone(),
                    item: self.item_labels[j].clone(),
                    residual: rational_to_f64(&r),
                });
            }
            let size = int(&self.agent_sizes[i]);
            let held: Rational = (0..nm).map(|j| e.units[i][j].clone()).sum();
            let fill = &held / &size;
            let u: Rational = (0..nm).map(|j| &e.values[i][j] * &e.units[i][j]).sum::<Rational>() / &size;
            let label = &self.agent_labels[i];
            note(format!("{label}: q >= 0"), (-e.q[i].clone()).max(Rational::zero()), &mut worst);
            note(format!("{label}: q slackness"), (e.q[i].abs() * (Rational::one() - &fill)).abs(), &mut worst);
            note(format!("{label}: row capacity"), (&fill - Rational::one()).max(Rational::zero()), &mut worst);
            note(format!("{label}: utility = 1"), (u - Rational::one()).abs(), &mut worst);
        }
        for &j in &items {
            let size = int(&self.item_sizes[j]);
            let used: Rational = (0..na).filter(|&i| e.present[i]).map(|i| e.units[i][j].clone()).sum();
            let fill = &used / &size;
            let label = &self.item_labels[j];
            note(format!("{label}: t >= 0"), (-e.t[j].clone()).max(Rational::zero()), &mut worst);
            note(format!("{label}: t slackness"), (e.t[j].abs() * (Rational::one() - &fill)).abs(), &mut worst);
            note(format!("{label}: supply"), (&fill - Rational::one()).max(Rational::zero()), &mut worst);
        }
        CertReport { table, equilibrium: eq, residual: rational_to_f64(&worst), exact: rstr(&worst), pairs, conditions }
    }

    /// Tables present in this market, in order.
    pub fn tables(&self) -> Vec<TableId> {
        let mut t: Vec<TableId> = self.item_tables.iter().flatten().copied().collect();
        t.sort();
        t.dedup();
        t
    }

    /// One unit row per bidder and one unit column per item.
    pub fn expand(&self, max_agents: usize) -> Result<Instance> {
        let values: Vec<Vec<f64>> = self.values.iter().map(|r| r.iter().map(rational_to_f64).collect()).collect();
        expand_sized(&values, &self.agent_sizes, &self.item_sizes, max_agents)
    }

    fn json_eq(&self, e: &EquilibriumData) -> Value {
        let m = |x: &Vec<Vec<Rational>>| -> Vec<Vec<String>> { x.iter().map(|r| r.iter().map(rstr).collect()).collect() };
        json!({
            "present": e.present,
            "values": m(&e.values),
            "units": m(&e.units),
            "t": e.t.iter().map(rstr).collect::<Vec<_>>(),
            "q": e.q.iter().map(rstr).collect::<Vec<_>>(),
        })
    }

    /// Write instance.json, initial_assignment.json, final_assignment.json, removal_set.json and
    /// params.json. Numbers are exact fraction strings.
    pub fn write_bundle(&self, params: &LowerBoundParams, dir: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Io { path: dir.to_path_buf(), source: e };
        fs::create_dir_all(dir).map_err(io)?;
        let instance = json!({
            "agent_labels": self.agent_labels,
            "item_labels": self.item_labels,
            "agent_sizes": self.agent_sizes.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            "item_sizes": self.item_sizes.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            "values": self.values.iter().map(|r| r.iter().map(rstr).collect::<Vec<_>>()).collect::<Vec<_>>(),
        });
        let removal = json!({
            "removal_set": self.removal_set.iter().map(|&i| &self.agent_labels[i]).collect::<Vec<_>>(),
            "removal_indices": self.removal_set,
            "loser": self.agent_labels[self.loser],
            "loser_index": self.loser,
            "loser_ratio": rstr(&self.loser_ratio()),
        });
        for (name, v) in [
            ("instance.json", instance),
            ("initial_assignment.json", self.json_eq(&self.initial)),
            ("final_assignment.json", self.json_eq(&self.final_eq)),
            ("removal_set.json", removal),
            ("params.json", params.to_json()),
        ] {
            let path = dir.join(name);
            let text = serde_json::to_string_pretty(&v).expect("json values serialize");
            fs::write(&path, text).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        }
        Ok(())
    }
}

/// Replicate each row `agent_sizes[i]` times and each column `item_sizes[j]` times.
pub fn expand_sized(values: &[Vec<f64>], agent_sizes: &[BigInt], item_sizes: &[BigInt], max_agents: usize) -> Result<Instance> {
    let total_agents: BigInt = agent_sizes.iter().sum();
    let total_items: BigInt = item_sizes.iter().sum();
    let fits = |x: &BigInt| x.to_usize().filter(|&n| n <= max_agents);
    let (Some(n), Some(m)) = (fits(&total_agents), fits(&total_items)) else {
        return Err(Error::TooLarge(format!(
            "{total_agents} agents and {total_items} items exceed the limit of {max_agents}"
        )));
    };
    let cols: Vec<usize> = item_sizes
        .iter()
        .enumerate()
        .flat_map(|(j, z)| std::iter::repeat(j).take(z.to_usize().unwrap_or(0)))
        .collect();
    debug_assert_eq!(cols.len(), m);
    let mut rows = Vec::with_capacity(n);
    for (i, w) in agent_sizes.iter().enumerate() {
        let row: Vec<f64> = cols.iter().map(|&j| values[i][j]).collect();
        for _ in 0..w.to_usize().unwrap_or(0) {
            rows.push(row.clone());
        }
    }
    Instance::new(rows)
}

/// Parameters and aggregated market for depth `s`.
#[derive(Clone, Debug)]
pub struct LowerBound {
    pub params: LowerBoundParams,
    pub market: SizedMarket,
}

pub fn lowerbound_params(s: usize) -> Result<LowerBoundParams> {
    LowerBoundParams::new(s)
}

pub fn gen_lowerbound(s: usize) -> Result<LowerBound> {
    gen_lowerbound_with(s, SfRule::ClosedForm)
}

/// Fails when the chosen size rule leaves some valuation negative or over its cap.
pub fn gen_lowerbound_with(s: usize, rule: SfRule) -> Result<LowerBound> {
    let params = LowerBoundParams::with_rule(s, rule)?;
    let issues = params.issues();
    if !issues.is_empty() {
        return Err(Error::InvalidParameter(format!("no valid market at s = {s}: {}", issues.join("; "))));
    }
    let market = build_market(&params);
    Ok(LowerBound { params, market })
}

/// Certify one table of the market for depth `s`.
pub fn certify_lowerbound_tables(lb: &LowerBound, table: TableId, eq: Equilibrium) -> CertReport {
    lb.market.certify(table, eq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_level_sizes() {
        let p = lowerbound_params(1).unwrap();
        let l = p.level(1);
        assert_eq!(l.v, rat(9, 4));
        assert_eq!(l.regime, Regime::Low);
        let sizes: Vec<i64> = [&l.s_h, &l.s_d, &l.s_b, &l.s_g, &l.s_c, &l.s_f, &l.s_a].iter().map(|x| x.to_i64().unwrap()).collect();
        assert_eq!(sizes, vec![13, 9, 5, 9, 18, 20, 43]);
        assert_eq!(p.k0, BigInt::from(43));
        assert_eq!(p.n_agents, BigInt::from(805_896));
    }

    #[test]
    fn identities_up_to_eight() {
        for s in 1..=8 {
            let p = lowerbound_params(s).unwrap();
            assert!(p.identity_violations().is_empty(), "s={s}: {:?}", p.identity_violations());
        }
    }

    #[test]
    fn first_high_level_is_seven() {
        let p = lowerbound_params(8).unwrap();
        let regimes: Vec<Regime> = p.levels.iter().map(|l| l.regime).collect();
        assert_eq!(regimes[5], Regime::Low);
        assert_eq!(regimes[6], Regime::High);
    }

    #[test]
    fn closed_form_breaks_at_level_four() {
        assert!(lowerbound_params(3).unwrap().issues().is_empty());
        let issues = lowerbound_params(4).unwrap().issues();
        assert!(issues.iter().any(|m| m.starts_with("r=4: vF_f")), "{issues:?}");
        assert!(gen_lowerbound(4).is_err());
        assert!(LowerBoundParams::with_rule(8, SfRule::Derived).unwrap().issues().is_empty());
    }

    #[test]
    fn market_is_balanced_and_consistent() {
        for s in 1..=3 {
            let lb = gen_lowerbound(s).unwrap();
            let m = &lb.market;
            assert!(m.conflicts.is_empty(), "{:?}", m.conflicts);
            assert_eq!(m.total_agents(), lb.params.n_agents);
            assert_eq!(m.total_items(), lb.params.n_agents);
            for i in 0..m.agent_labels.len() {
                if m.final_eq.present[i] {
                    assert!(m.final_scale(i).is_some(), "row {} is not a rescaling", m.agent_labels[i]);
                }
            }
        }
    }

    #[test]
    fn all_tables_certify_exactly() {
        for s in 1..=3 {
            let lb = gen_lowerbound(s).unwrap();
            for t in lb.market.tables() {
                for eq in [Equilibrium::Initial, Equilibrium::Final] {
                    let rep = certify_lowerbound_tables(&lb, t, eq);
                    assert_eq!(rep.exact, "0", "s={s} {t:?} {eq:?}: {:?}", rep.conditions.iter().filter(|c| *c.1 > 0.0).collect::<Vec<_>>());
                }
            }
        }
    }

    #[test]
    fn corrupted_price_shows_up() {
        let mut lb = gen_lowerbound(1).unwrap();
        lb.market.initial.t[1] += rat(1, 10);
        assert!(certify_lowerbound_tables(&lb, TableId::Base, Equilibrium::Initial).residual >= 0.09);
    }

    #[test]
    fn loser_ratio_is_v_plus_one() {
        let lb = gen_lowerbound(2).unwrap();
        assert_eq!(lb.market.loser_ratio(), lb.params.v_s() + rat(1, 1));
    }

    #[test]
    fn expansion() {
        assert!(matches!(gen_lowerbound(1).unwrap().market.expand(100_000), Err(Error::TooLarge(_))));
        let inst = expand_sized(&[vec![1.0, 2.0], vec![3.0, 4.0]], &[BigInt::from(2), BigInt::from(1)], &[BigInt::from(1), BigInt::from(2)], 10).unwrap();
        assert_eq!(inst.values().to_rows(), vec![vec![1.0, 2.0, 2.0], vec![1.0, 2.0, 2.0], vec![3.0, 4.0, 4.0]]);
    }
}
