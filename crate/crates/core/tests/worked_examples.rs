//! Small hand-checkable cases, each compared against an oracle computed here.

use matchlab::analysis::{approx_ratio, benchmark, misreport_gain, rho_exact, rho_scan, Ratio};
use matchlab::instances::lowerbound::{Equilibrium, TableId};
use matchlab::instances::{gen_lowerbound, gen_ordinal_worst, gen_random, gen_rsd_worst, table1, GeneratorSpec, ValueDistribution};
use matchlab::lottery::{decompose, sample, Lottery, LotteryTerm};
use matchlab::mechanisms::{pa_run, ps_run, rpi_run, rsd_run, Mechanism, RsdMode};
use matchlab::nsw::{kkt_check, kkt_check_agents, recover_duals, renormalize, solve, Duals, NswProblem};
use matchlab::{utilities, DisagreementPoint, Error, FractionalAssignment, Instance, Matrix};
use num_bigint::BigInt;

const TOL: f64 = 1e-7;

fn fa(rows: Vec<Vec<f64>>) -> FractionalAssignment {
    FractionalAssignment::from_matrix(Matrix::from_rows(rows).unwrap())
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

// straightforward double loop, kept separate from the library's matrix code
fn inner_products(values: &[Vec<f64>], p: &[Vec<f64>]) -> Vec<f64> {
    values.iter().zip(p).map(|(v, p)| v.iter().zip(p).map(|(a, b)| a * b).sum()).collect()
}

fn log_nsw(u: &[f64]) -> f64 {
    u.iter().map(|x| x.ln()).sum()
}

#[test]
fn utilities_match_hand_products() {
    let inst = table1();
    let id = FractionalAssignment::from_matrix(Matrix::identity(3));
    assert_eq!(utilities(&inst, &id).unwrap().0, vec![1.0, 2.0, 1.0]);
    let p = vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], vec![0.0, 0.0, 0.0]];
    let u = utilities(&inst, &fa(p.clone())).unwrap();
    assert_eq!(u.0, inner_products(&inst.values().to_rows(), &p));
    assert_eq!(&u.0[..2], &[1.5, 1.5]);
    assert_eq!(utilities(&inst, &fa(vec![vec![0.0; 3]; 3])).unwrap().0, vec![0.0; 3]);
}

#[test]
fn instance_validation_cases() {
    let t = table1();
    assert_eq!(t.supplies(), &[1.0, 1.0, 1.0]);
    assert!(Instance::new(vec![vec![0.0]]).is_ok());
    let bad = Instance::with_supplies(vec![vec![1.0; 3]; 2], vec![1.0, 1.0]);
    assert!(matches!(bad, Err(Error::DimensionMismatch(_))));
}

#[test]
fn two_agents_one_good_item_split_by_grid_search() {
    let inst = Instance::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
    let sol = solve(&NswProblem::new(&inst), TOL).unwrap();
    // oracle: maximize x (1 - x) over a 1e-4 grid
    let best = (0..=10_000).map(|k| k as f64 * 1e-4).max_by(|a, b| (a * (1.0 - a)).total_cmp(&(b * (1.0 - b)))).unwrap();
    assert!(close(&sol.utilities.0, &[best, 1.0 - best], 1e-4));
    let single = Instance::new(vec![vec![1.0, 0.0]]).unwrap();
    let s = solve(&NswProblem::new(&single), TOL).unwrap();
    assert!((s.utilities.0[0] - 1.0).abs() < 1e-9);
}

#[test]
fn printed_initial_duals_certify() {
    let inst = table1();
    let p = FractionalAssignment::from_matrix(Matrix::identity(3));
    let d = Duals { item_prices: vec![0.0, 1.0, 1.0], agent_prices: vec![1.0, 0.0, 0.0] };
    let zero = DisagreementPoint::zeros(3);
    assert!(kkt_check(&inst, &p, &d, &zero).unwrap() <= 1e-12);
    assert!(kkt_check(&inst, &p, &recover_duals(&inst, &p, &zero, TOL).unwrap(), &zero).unwrap() <= TOL);
}

#[test]
fn corrected_final_duals_certify() {
    // solve the complementary-slackness system for a:(1/2,1/2,0), b:(0,1/2,1/2):
    // on the support 2/3 = t_A + q_a, 4/3 = t_B + q_a, 4/3 = t_B + q_b, 2/3 = t_C + q_b, and A, C are
    // under-allocated so t_A = t_C = 0, giving q = 2/3 and t_B = 2/3
    let inst = table1();
    let p = fa(vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], vec![0.0; 3]]);
    let zero = DisagreementPoint::zeros(3);
    let d = Duals { item_prices: vec![0.0, 2.0 / 3.0, 0.0], agent_prices: vec![2.0 / 3.0, 2.0 / 3.0, 0.0] };
    assert!(kkt_check_agents(&inst, &p, &d, &zero, &[0, 1]).unwrap() <= 1e-12);
    let printed = Duals { item_prices: vec![2.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0], agent_prices: vec![0.0, 0.0, 0.0] };
    assert!(kkt_check_agents(&inst, &p, &printed, &zero, &[0, 1]).unwrap() > 0.1);
}

#[test]
fn diagonal_and_one_by_one_certificates() {
    let inst = Instance::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let p = FractionalAssignment::from_matrix(Matrix::identity(2));
    let d = Duals { item_prices: vec![1.0, 1.0], agent_prices: vec![0.0, 0.0] };
    assert!(kkt_check(&inst, &p, &d, &DisagreementPoint::zeros(2)).unwrap() <= 1e-12);

    let one = Instance::new(vec![vec![3.0]]).unwrap();
    let p = FractionalAssignment::from_matrix(Matrix::identity(1));
    let d = recover_duals(&one, &p, &DisagreementPoint::zeros(1), TOL).unwrap();
    assert!((d.item_prices[0] - 1.0).abs() < 1e-9 && d.agent_prices[0].abs() < 1e-9);
}

#[test]
fn perturbed_assignment_is_not_optimal() {
    let inst = table1();
    let eps = 0.05;
    let p = fa(vec![vec![1.0 - eps, eps, 0.0], vec![eps, 1.0 - eps, 0.0], vec![0.0, 0.0, 1.0]]);
    let rows = inst.values().to_rows();
    let before = log_nsw(&inner_products(&rows, &Matrix::identity(3).to_rows()));
    let after = log_nsw(&inner_products(&rows, &p.probs.to_rows()));
    assert!(after < before);
    assert!(matches!(recover_duals(&inst, &p, &DisagreementPoint::zeros(3), TOL), Err(Error::NotOptimal { .. })));
}

#[test]
fn renormalized_rows() {
    let inst = table1();
    let zero = DisagreementPoint::zeros(3);
    let r = renormalize(&inst, &FractionalAssignment::from_matrix(Matrix::identity(3)), &zero).unwrap();
    assert_eq!(r.values.row(1), &[0.0, 1.0, 0.5]);
    assert_eq!(r.values.row(2), inst.values().row(2));
    let fin = fa(vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], vec![0.0, 0.0, 1.0]]);
    let r = renormalize(&inst, &fin, &zero).unwrap();
    assert!(close(r.values.row(0), &[2.0 / 3.0, 4.0 / 3.0, 0.0], 1e-15));
}

#[test]
fn lottery_draw_frequencies() {
    let l = Lottery {
        terms: vec![
            LotteryTerm { weight: 0.5, matching: vec![Some(0), Some(1)] },
            LotteryTerm { weight: 0.5, matching: vec![Some(1), Some(0)] },
        ],
        residual: 0.0,
    };
    let draws = 10_000u64;
    let hits = (0..draws).filter(|&s| sample(&l, s) == vec![Some(0), Some(1)]).count() as f64;
    let sigma = (0.25 / draws as f64).sqrt();
    assert!((hits / draws as f64 - 0.5).abs() <= 3.0 * sigma);

    let one = Lottery { terms: vec![LotteryTerm { weight: 1.0, matching: vec![Some(2), Some(0), Some(1)] }], residual: 0.0 };
    assert!((0..50).all(|s| sample(&one, s) == vec![Some(2), Some(0), Some(1)]));
}

#[test]
fn lottery_expected_utilities_equal_marginal_utilities() {
    let inst = gen_random(6, ValueDistribution::Uniform01, 4).unwrap();
    let p = ps_run(&inst);
    let l = decompose(&p, 1e-9).unwrap();
    assert!(close(&l.expected_utilities(&inst), &utilities(&inst, &p).unwrap().0, 1e-9));
}

#[test]
fn pa_small_cases() {
    let inst = Instance::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let pa = pa_run(&inst, &DisagreementPoint::zeros(2)).unwrap();
    assert!(close(&pa.fractions, &[1.0, 1.0], 1e-9));
    assert!(pa.assignment.probs.max_abs_diff(&Matrix::identity(2)) < 1e-9);

    // leave-one-out: alone, an agent gets all of item 1, so the other's loss is 1/2
    let inst = Instance::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
    let pa = pa_run(&inst, &DisagreementPoint::zeros(2)).unwrap();
    assert!(close(&pa.fractions, &[0.5, 0.5], 1e-7));
    assert!((pa.assignment.probs[(0, 0)] - 0.25).abs() < 1e-7);
    assert!((pa.assignment.probs[(1, 0)] - 0.25).abs() < 1e-7);
}

#[test]
fn pa_rows_are_scaled_nsw_rows() {
    for seed in 0..20 {
        let inst = gen_random(5, ValueDistribution::Uniform01, seed).unwrap();
        let pa = pa_run(&inst, &DisagreementPoint::zeros(5)).unwrap();
        let rows = pa.assignment.probs.row_sums();
        for (i, (r, f)) in rows.iter().zip(&pa.fractions).enumerate() {
            assert!((r - f).abs() < 1e-6, "seed {seed} agent {i}");
            assert!(*f > (-1.0f64).exp() - 1e-6 && *f <= 1.0 + 1e-6);
        }
    }
}

#[test]
fn rpi_small_cases() {
    let inst = gen_random(3, ValueDistribution::Uniform01, 0).unwrap();
    let p = rpi_run(&inst, 4, 0).unwrap();
    assert!(p.probs.max_abs_diff(&Matrix::filled(3, 3, 1.0 / 3.0)) < 1e-15);
    let one = Instance::new(vec![vec![0.4]]).unwrap();
    assert_eq!(rpi_run(&one, 4, 9).unwrap().probs, Matrix::identity(1));
    let inst = gen_random(8, ValueDistribution::Uniform01, 1).unwrap();
    let p = rpi_run(&inst, 4, 1).unwrap();
    assert!(p.probs.row_sums().iter().chain(&p.probs.col_sums()).all(|s| (s - 1.0).abs() <= 1e-8));
}

#[test]
fn rsd_enumerated_by_hand() {
    let inst = gen_rsd_worst(3, 0.01).unwrap();
    let u = utilities(&inst, &rsd_run(&inst, RsdMode::Exact).unwrap()).unwrap();
    assert!((u.0[0] - 1.0 / 3.0).abs() < 1e-15);
    // both orders of two agents who want item 0
    let inst = Instance::new(vec![vec![1.0, 0.5], vec![1.0, 0.2]]).unwrap();
    let p = rsd_run(&inst, RsdMode::Exact).unwrap();
    assert_eq!(p.probs.to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
    let id = Instance::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
    assert_eq!(rsd_run(&id, RsdMode::Exact).unwrap().probs, Matrix::identity(3));
    assert_eq!(ps_run(&id).probs, Matrix::identity(3));
}

#[test]
fn ps_on_ordinal_hard_instance() {
    let inst = gen_ordinal_worst(4, 0.01).unwrap();
    assert!(ps_run(&inst).probs[(0, 0)] <= 1.0 / 3.0 + 1e-12);
    let two = Instance::new(vec![vec![1.0, 0.3], vec![0.9, 0.1]]).unwrap();
    assert_eq!(ps_run(&two).probs.to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
}

#[test]
fn benchmark_cases() {
    let same = Instance::new(vec![vec![3.0, 1.0, 2.0]; 3]).unwrap();
    let b = benchmark(&same, TOL).unwrap();
    assert!(close(&b.benchmark_utilities, &[2.0, 2.0, 2.0], 1e-9));
    assert!(b.solution.assignment.probs.max_abs_diff(&Matrix::filled(3, 3, 1.0 / 3.0)) < 1e-9);

    let diag = Instance::new(vec![vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
    let b = benchmark(&diag, TOL).unwrap();
    assert!(close(&b.benchmark_utilities, &[2.0, 2.0], 1e-7));
    assert!(close(&b.disagreement.0, &[1.0, 1.0], 0.0));

    let one = Instance::new(vec![vec![0.7]]).unwrap();
    assert!((benchmark(&one, TOL).unwrap().benchmark_utilities[0] - 0.7).abs() < 1e-12);
}

#[test]
fn ratios_on_hard_instances() {
    let n = 5;
    let inst = gen_rsd_worst(n, 1e-3).unwrap();
    let u = utilities(&inst, &rsd_run(&inst, RsdMode::Exact).unwrap()).unwrap();
    let b = benchmark(&inst, TOL).unwrap();
    let r = approx_ratio(&u.0, &b.benchmark_utilities);
    let Ratio::Finite(max) = r.max else { panic!("infinite ratio") };
    assert!(max <= n as f64 + 1e-9 && max >= 0.99 * n as f64 * (1.0 - 1e-2));

    let inst = gen_ordinal_worst(n, 1e-3).unwrap();
    let u = utilities(&inst, &ps_run(&inst)).unwrap();
    let b = benchmark(&inst, TOL).unwrap();
    let r = approx_ratio(&u.0, &b.benchmark_utilities);
    let Ratio::Finite(agent0) = r.per_agent[0] else { panic!("infinite ratio") };
    assert!(agent0 >= (n - 1) as f64 * (1.0 - 1e-2));

    let same = approx_ratio(&b.benchmark_utilities, &b.benchmark_utilities);
    assert!(same.per_agent.iter().all(|r| *r == Ratio::Finite(1.0)));
}

#[test]
fn rho_small_cases() {
    let twins = Instance::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
    assert!((rho_exact(&twins, TOL).unwrap().rho - 1.0).abs() < 1e-6);
    for n in 1..=6 {
        let id = Instance::from_matrix(Matrix::identity(n), vec![1.0; n]).unwrap();
        assert!((rho_exact(&id, TOL).unwrap().rho - 1.0).abs() < 1e-6, "n = {n}");
    }
    let t = rho_exact(&table1(), TOL).unwrap();
    assert_eq!((t.witness_subset.clone(), t.witness_agent), (vec![0, 1], 1));
}

#[test]
fn rho_scan_cases() {
    let spec: GeneratorSpec = "random:4".parse().unwrap();
    let a = rho_scan(&spec, 1, 17, &[], TOL).unwrap();
    let b = rho_scan(&spec, 1, 17, &[], TOL).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let c = rho_scan(&spec, 3, 17, &[table1()], TOL).unwrap();
    assert!(c.max_rho >= 4.0 / 3.0 - 1e-6);
}

#[test]
fn pa_resists_misreports() {
    let inst = gen_random(4, ValueDistribution::Uniform01, 3).unwrap();
    let rep = matchlab::analysis::truthfulness_audit(&inst, &Mechanism::Pa, 20, 3).unwrap();
    assert!(rep.worst_gain <= 1e-5, "{}", rep.worst_gain);
}

fn permutations(v: &[f64]) -> Vec<Vec<f64>> {
    if v.len() <= 1 {
        return vec![v.to_vec()];
    }
    let mut out = Vec::new();
    for k in 0..v.len() {
        let mut rest = v.to_vec();
        let x = rest.remove(k);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

#[test]
fn ps_can_be_manipulated() {
    // agent 0 has values (10, k, 0) in some order, the others come from a coarse grid; try every
    // reordering of agent 0's row
    let grid = [0.0, 1.0, 2.0, 3.0];
    let mut found = None;
    'search: for k in 1..10 {
        for code in 0..grid.len().pow(6) {
            let mut c = code;
            let mut rows = vec![vec![10.0, k as f64, 0.0], vec![0.0; 3], vec![0.0; 3]];
            for cell in rows[1..].iter_mut().flatten() {
                *cell = grid[c % 4];
                c /= 4;
            }
            let inst = Instance::new(rows.clone()).unwrap();
            for lie in permutations(&rows[0]) {
                let g = misreport_gain(&inst, &Mechanism::Ps, 0, &lie).unwrap();
                if g > 1e-9 {
                    found = Some((rows, lie, g));
                    break 'search;
                }
            }
        }
    }
    let (rows, lie, g) = found.expect("a profitable PS misreport on the grid");
    assert!(g > 0.0, "{rows:?} {lie:?}");
}

#[test]
fn rsd_rank_permutations_never_help() {
    for seed in 0..5 {
        let inst = gen_random(4, ValueDistribution::Uniform01, seed).unwrap();
        for i in 0..4 {
            for lie in permutations(inst.values().row(i)) {
                let g = misreport_gain(&inst, &Mechanism::Rsd(RsdMode::Exact), i, &lie).unwrap();
                assert!(g <= 1e-12, "seed {seed} agent {i} gain {g}");
            }
        }
    }
}

#[test]
fn rpi_outer_sample_resists_misreports() {
    use matchlab::analysis::sample_misreports;
    use matchlab::mechanisms::sample_agents;
    let mut checked = 0;
    for seed in 0..4u64 {
        let inst = gen_random(8, ValueDistribution::Uniform01, seed).unwrap();
        let mech = Mechanism::Rpi { n0: 4, seed };
        for &i in &sample_agents(&(0..8).collect::<Vec<_>>(), 4, seed, 0) {
            for lie in sample_misreports(inst.values().row(i), 20, seed * 100 + i as u64) {
                let g = misreport_gain(&inst, &mech, i, &lie).unwrap();
                assert!(g <= 1e-5, "seed {seed} agent {i} gain {g}");
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn generator_cases() {
    let g: GeneratorSpec = "random:3,grid=2".parse().unwrap();
    assert_eq!(g.generate(7).unwrap(), g.generate(7).unwrap());
    let u = gen_random(5, ValueDistribution::Uniform01, 2).unwrap();
    assert!(u.values().as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    let s = gen_random(6, ValueDistribution::Sparse(0.5), 2).unwrap();
    let zeros = s.values().as_slice().iter().filter(|v| **v == 0.0).count();
    // 36 draws at p = 1/2: mean 18, sd 3
    assert!((6..=30).contains(&zeros), "{zeros}");

    let e = 0.25;
    assert_eq!(
        gen_rsd_worst(3, e).unwrap().values().to_rows(),
        vec![vec![1.0, 0.0, 0.0], vec![1.0, 1.0 - e, 0.0], vec![1.0, 0.0, 1.0 - e]]
    );
    assert_eq!(gen_rsd_worst(1, e).unwrap().values().to_rows(), vec![vec![1.0]]);
    let e = 0.1;
    assert_eq!(
        gen_ordinal_worst(4, e).unwrap().values().to_rows(),
        vec![
            vec![1.0, e, 0.0, 0.0],
            vec![1.0, 0.0, 1.0 - e, 0.0],
            vec![1.0, 0.0, 0.0, 1.0 - e],
            vec![0.0, 1.0, 1.0, 1.0]
        ]
    );
}

#[test]
fn hard_instance_benchmarks_near_one() {
    let b = benchmark(&gen_rsd_worst(4, 1e-3).unwrap(), TOL).unwrap();
    assert!(b.benchmark_utilities[0] >= 0.99);
    let e = 1e-4;
    let b = benchmark(&gen_ordinal_worst(4, e).unwrap(), TOL).unwrap();
    assert!(b.benchmark_utilities.iter().all(|u| *u >= 1.0 - 10.0 * e), "{:?}", b.benchmark_utilities);
}

#[test]
fn lowerbound_market_shape() {
    let lb = gen_lowerbound(1).unwrap();
    let m = &lb.market;
    let k0 = BigInt::from(43);
    let per_copy = [("A_0", 17000), ("B_0", 850), ("C_0", 816), ("D_0", 34), ("E_0", 33), ("F_0", 1), ("G_0", 5)];
    for (label, size) in per_copy {
        let j = m.item_labels.iter().position(|l| l == label).unwrap();
        assert_eq!(m.item_sizes[j], &k0 * size, "{label}");
    }
    // H_0 is shared with the next level
    let h = m.item_labels.iter().position(|l| l.starts_with("H_0")).unwrap();
    assert_eq!(m.item_sizes[h], k0);
    let i_s = m.item_labels.iter().position(|l| l == "I_1").unwrap();
    let v = lb.params.v_s().clone();
    assert_eq!(m.values[m.loser][i_s], (v + num_rational::BigRational::from_integer(1.into())).recip());

    let base = m.certify(TableId::Base, Equilibrium::Initial);
    assert!(base.residual <= 1e-9);
    let last = m.certify(TableId::Last, Equilibrium::Initial);
    assert!(last.residual <= 1e-9);
}
