//! One PASS/FAIL line per acceptance criterion, at fixed tolerances. Runs without the libtest
//! harness so the lines always reach stdout; exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;

use matchlab::analysis::{
    approx_ratio, benchmark, crossover, rho_exact, rho_scan, rpi_approximation, truthfulness_audit, Ratio,
};
use matchlab::instances::lowerbound::{Equilibrium, TableId};
use matchlab::instances::{
    gen_lowerbound, gen_ordinal_worst, gen_random, gen_rsd_worst, lowerbound_params, sinkhorn, split_seed, table1,
    GeneratorSpec, ValueDistribution,
};
use matchlab::lottery::{decompose, Lottery};
use matchlab::mechanisms::{pa_run, ps_run, rpi_run, rsd_run, Mechanism, RsdMode};
use matchlab::nsw::{kkt_check, kkt_check_agents, recover_duals_agents, solve, Duals, NswProblem};
use matchlab::{utilities, DisagreementPoint, Error, FractionalAssignment, Matrix};

const TOL: f64 = 1e-7;

type Criterion = fn() -> Result<Outcome, Error>;

struct Outcome {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn finite(r: Ratio) -> f64 {
    match r {
        Ratio::Finite(x) => x,
        Ratio::Infinite => f64::INFINITY,
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn table1_reproduction() -> Result<Outcome, Error> {
    let t = Instant::now();
    let inst = table1();
    let full = solve(&NswProblem::new(&inst), TOL)?;
    let sub = solve(&NswProblem::new(&inst).agents(vec![0, 1]), TOL)?;
    let rho = rho_exact(&inst, TOL)?.rho;
    let el = t.elapsed();
    let ok = close(&full.utilities.0, &[1.0, 2.0, 1.0], 1e-6)
        && close(&sub.utilities.0[..2], &[1.5, 1.5], 1e-6)
        && (rho - 4.0 / 3.0).abs() <= 1e-6
        && el < Duration::from_secs(1);
    Ok(check(
        ok,
        format!("u={:?} u_ab={:?} rho={rho:.9} in {el:.2?}", full.utilities.0, &sub.utilities.0[..2]),
    ))
}

fn kkt_certification() -> Result<Outcome, Error> {
    let t = Instant::now();
    let inst = table1();
    let zero = DisagreementPoint::zeros(3);
    let initial = FractionalAssignment::from_matrix(Matrix::identity(3));
    let printed = Duals { item_prices: vec![0.0, 1.0, 1.0], agent_prices: vec![1.0, 0.0, 0.0] };
    let r_init = kkt_check(&inst, &initial, &printed, &zero)?;
    let fin = FractionalAssignment::from_matrix(Matrix::from_rows(vec![
        vec![0.5, 0.5, 0.0],
        vec![0.0, 0.5, 0.5],
        vec![0.0, 0.0, 0.0],
    ])?);
    let d = recover_duals_agents(&inst, &fin, &zero, &[0, 1], TOL)?;
    let r_fin = kkt_check_agents(&inst, &fin, &d, &zero, &[0, 1])?;
    let el = t.elapsed();
    Ok(check(
        r_init <= 1e-9 && r_fin <= 1e-7 && el < Duration::from_secs(1),
        format!(
            "initial residual {r_init:.1e}, final residual {r_fin:.1e} with t={:?} q={:?} in {el:.2?}",
            d.item_prices,
            &d.agent_prices[..2]
        ),
    ))
}

fn rsd_ratio() -> Result<Outcome, Error> {
    let t = Instant::now();
    let eps = 1e-3;
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [3usize, 5, 8] {
        let inst = gen_rsd_worst(n, eps)?;
        let u = utilities(&inst, &rsd_run(&inst, RsdMode::Exact)?)?;
        let b = benchmark(&inst, TOL)?;
        let r = finite(approx_ratio(&u.0, &b.benchmark_utilities).max);
        let exact = (u.0[0] - 1.0 / n as f64).abs() <= 1e-15;
        let bench = b.benchmark_utilities[0] >= 1.0 - 10.0 * eps;
        let ratio = (r - n as f64).abs() <= 0.02 * n as f64;
        ok &= exact && bench && ratio;
        parts.push(format!("n={n}: u1={:.6} bench1={:.6} ratio={r:.4}", u.0[0], b.benchmark_utilities[0]));
    }
    let el = t.elapsed();
    Ok(check(ok && el < Duration::from_secs(10), format!("{} in {el:.2?}", parts.join("; "))))
}

fn ordinal_bound() -> Result<Outcome, Error> {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [4usize, 6] {
        let inst = gen_ordinal_worst(n, 1e-3)?;
        let b = benchmark(&inst, TOL)?;
        let floor = (n - 1) as f64 * (1.0 - 0.02);
        for (name, p) in [("rsd", rsd_run(&inst, RsdMode::Exact)?), ("ps", ps_run(&inst))] {
            let u = utilities(&inst, &p)?;
            let r = finite(approx_ratio(&u.0, &b.benchmark_utilities).per_agent[0]);
            ok &= r >= floor;
            parts.push(format!("n={n} {name}: {r:.4} (need {floor:.3})"));
        }
    }
    Ok(check(ok, parts.join("; ")))
}

fn pa_fraction_bound() -> Result<Outcome, Error> {
    let lo = (-1.0f64).exp() - 1e-6;
    let results: Vec<(f64, f64)> = (0..500u64)
        .into_par_iter()
        .map(|k| {
            let n = 3 + (k % 3) as usize;
            let inst = gen_random(n, ValueDistribution::Uniform01, split_seed(5, k))?;
            let pa = pa_run(&inst, &DisagreementPoint::zeros(n))?;
            let min = pa.fractions.iter().copied().fold(f64::INFINITY, f64::min);
            let max = pa.fractions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok((min, max))
        })
        .collect::<Result<_, Error>>()?;
    let min = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let max = results.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(check(min > lo && max <= 1.0 + 1e-6, format!("500 instances, f in [{min:.6}, {max:.9}]")))
}

fn pa_truthfulness() -> Result<Outcome, Error> {
    let t = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    let mut tried = 0;
    for k in 0..100u64 {
        let seed = split_seed(6, k);
        let inst = gen_random(4, ValueDistribution::Uniform01, seed)?;
        let rep = truthfulness_audit(&inst, &Mechanism::Pa, 20, seed)?;
        worst = worst.max(rep.worst_gain);
        tried += rep.misreports_tried;
    }
    let el = t.elapsed();
    Ok(check(
        worst <= 1e-5 && el < Duration::from_secs(300),
        format!("100 instances, {tried} misreports, worst gain {worst:.2e} in {el:.2?}"),
    ))
}

fn rpi_feasibility() -> Result<Outcome, Error> {
    let jobs: Vec<(usize, u64)> = (4..=12).flat_map(|n| (0..50u64).map(move |s| (n, s))).collect();
    let worst: Vec<f64> = jobs
        .par_iter()
        .map(|&(n, s)| {
            let seed = split_seed(7, (n * 1000) as u64 + s);
            let inst = gen_random(n, ValueDistribution::Uniform01, seed)?;
            let p = rpi_run(&inst, 4, seed)?;
            Ok(p.probs.row_sums().iter().chain(&p.probs.col_sums()).map(|x| (x - 1.0).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<_, Error>>()?;
    let w = worst.iter().copied().fold(0.0, f64::max);
    Ok(check(w <= 1e-8, format!("{} runs, worst marginal error {w:.1e}", jobs.len())))
}

fn rpi_approximation_bound() -> Result<Outcome, Error> {
    let reports = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let n = 4 + (k % 5) as usize;
            let seed = split_seed(8, k);
            let inst = gen_random(n, ValueDistribution::Uniform01, seed)?;
            rpi_approximation(&inst, 4, 200, seed, TOL)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let failures = reports.iter().filter(|r| !r.within_bound).count();
    let worst = reports
        .iter()
        .map(|r| finite(r.max_ratio_pessimistic) / r.bound)
        .fold(0.0, f64::max);
    Ok(check(failures == 0, format!("50 instances, worst (ratio - 3 sigma) / (4 e rho) = {worst:.3}, {failures} above")))
}

fn monotonicity_scan() -> Result<Outcome, Error> {
    let spec: GeneratorSpec = "random:5".parse()?;
    let scan = rho_scan(&spec, 500, 9, &[], TOL)?;
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    matchlab::io::save_json(&dir.join("rho_scan.json"), &scan)?;
    scan.write_histogram_csv(&dir.join("rho_histogram.csv"))?;
    let at_one = scan.trials.iter().filter(|t| t.rho <= 1.0 + 1e-6).count();
    Ok(check(
        scan.trials.len() == 500 && scan.max_rho >= 1.0 - 1e-9,
        format!(
            "max rho {:.6} at trial {}, {at_one}/500 with rho <= 1 (logged only), archived in {}",
            scan.max_rho,
            scan.argmax,
            dir.display()
        ),
    ))
}

fn lowerbound_family() -> Result<Outcome, Error> {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for s in 1..=3 {
        let p = lowerbound_params(s)?;
        let identities = p.identity_violations();
        let mod14 = p.levels.iter().all(|l| ((&l.s_h + 1u32) % BigInt::from(14)).is_zero());
        let k0_closed = p.k0_within_closed_bound();
        let lb = gen_lowerbound(s)?;
        let r_base = lb.market.certify(TableId::Base, Equilibrium::Initial).residual;
        let r_last = lb.market.certify(TableId::Last, Equilibrium::Initial).residual;
        let ratio = lb.market.loser_ratio();
        let v = p.v_s().clone();
        let ratio_is_v = ratio == v;
        let good = identities.is_empty() && mod14 && k0_closed && r_base <= 1e-9 && r_last <= 1e-9 && ratio_is_v;
        ok &= good;
        let mut line = format!(
            "s={s}: identities {} mod14 {} certs {:.0e}/{:.0e}",
            if identities.is_empty() { "ok" } else { "broken" },
            if mod14 { "ok" } else { "broken" },
            r_base,
            r_last
        );
        if !k0_closed {
            line.push_str(&format!(
                ", k0={} exceeds {:.2} (product bound holds: {})",
                p.k0,
                p.closed_bound_f64(),
                p.k0_within_product_bound()
            ));
        }
        if !ratio_is_v {
            let plus_one = ratio == &v + BigRational::from_integer(1.into());
            line.push_str(&format!(", loser ratio {ratio} != v_s = {v} (equals v_s + 1: {plus_one})"));
        }
        parts.push(line);
    }
    let el = t.elapsed();
    Ok(check(ok && el < Duration::from_secs(30), format!("{} in {el:.2?}", parts.join("; "))))
}

fn bvn_fidelity() -> Result<Outcome, Error> {
    use rand::{Rng, SeedableRng};
    let results: Vec<(f64, bool)> = (0..200u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(split_seed(11, k));
            let n = 1 + (k % 12) as usize;
            let mut a = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = rng.gen::<f64>();
                }
            }
            let p = sinkhorn(a, 1e-13, 100_000)?;
            let l = decompose(&FractionalAssignment::from_matrix(p.clone()), 1e-9)?;
            Ok((l.marginals(n, n).max_abs_diff(&p), l.terms.len() <= Lottery::term_bound(n)))
        })
        .collect::<Result<_, Error>>()?;
    let err = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let within = results.iter().all(|r| r.1);
    Ok(check(err <= 1e-8 && within, format!("200 matrices, worst error {err:.1e}, term cap respected: {within}")))
}

fn asymptotic_formulas() -> Result<Outcome, Error> {
    let rep = crossover();
    Ok(check(
        rep.holds,
        format!("crossover n = {}, {} points up to 2^64 - 1 checked", rep.crossover, rep.checked),
    ))
}

fn main() {
    let criteria: [(&str, Criterion); 12] = [
        ("three-agent reproduction", table1_reproduction),
        ("kkt certification", kkt_certification),
        ("rsd ratio", rsd_ratio),
        ("ordinal bound", ordinal_bound),
        ("pa fraction bound", pa_fraction_bound),
        ("pa truthfulness", pa_truthfulness),
        ("rpi feasibility", rpi_feasibility),
        ("rpi approximation", rpi_approximation_bound),
        ("monotonicity scan", monotonicity_scan),
        ("lower-bound family", lowerbound_family),
        ("bvn fidelity", bvn_fidelity),
        ("asymptotic formulas", asymptotic_formulas),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = run().unwrap_or_else(|e| Outcome { ok: false, detail: format!("error: {e}") });
        let tag = if out.ok { "PASS" } else { "FAIL" };
        if !out.ok {
            failed += 1;
        }
        println!("{tag} {:>2} {name}: {} [{:.2?}]", k + 1, out.detail, t.elapsed());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
