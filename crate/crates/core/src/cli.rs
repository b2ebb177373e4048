//! Command-line front end: `matchlab <command> ...`. Every command writes JSON/CSV into `--out`
//! and prints a one-line summary.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    approx_ratio, benchmark, expected_utilities, rho_exact_with, rho_scan, truthfulness_audit, RhoOffsets,
};
use crate::error::{Error, Result};
use crate::instances::lowerbound::{gen_lowerbound_with, Equilibrium, SfRule};
use crate::instances::{table1, GeneratorSpec};
use crate::io::{load_instance, load_json, save_instance, save_json, save_report, MechanismReport, ReportMetadata};
use crate::lottery::{decompose, sample};
use crate::mechanisms::{pa_run, Mechanism, RsdMode, DEFAULT_N0};
use crate::model::{DisagreementPoint, FractionalAssignment, Instance, Matrix};
use crate::nsw::{solve_with, NswOptions, NswProblem, DEFAULT_SOLVER_TOL};
use crate::utilities;

const GEN_HELP: &str = "generator spec: random:N[,grid=K|sparse=P], rsd-worst:N[,EPS], ordinal-worst:N[,EPS], table1";

#[derive(Debug, Parser)]
#[command(name = "matchlab", version, about = "Truthful cardinal mechanisms for one-sided matching")]
pub struct Cli {
    /// Numerical tolerance (KKT residual, validity checks).
    #[arg(long, global = true, env = "MATCHLAB_TOL", default_value_t = DEFAULT_SOLVER_TOL)]
    pub tol: f64,
    /// Output directory for JSON/CSV artifacts.
    #[arg(long, global = true, default_value = "matchlab-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Instance JSON file.
    #[arg(long, conflicts_with = "gen")]
    pub instance: Option<PathBuf>,
    #[arg(long, help = GEN_HELP)]
    pub gen: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum OffsetsArg {
    Zero,
    Uniform,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum RuleArg {
    ClosedForm,
    Derived,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the NSW program and certify it.
    Solve {
        #[command(flatten)]
        source: Source,
        /// Comma-separated agent labels or indices (default: all).
        #[arg(long)]
        agents: Option<String>,
        #[arg(long, value_enum, default_value = "zero")]
        offsets: OffsetsArg,
        /// Also write the convergence trace as CSV.
        #[arg(long)]
        trace: bool,
    },
    /// Run a mechanism (pa, rpi, rsd, ps) and compare with the bargaining benchmark.
    Mech {
        name: String,
        #[command(flatten)]
        source: Source,
        /// Repetitions for randomized mechanisms (RPI runs, or RSD orders without --exact).
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Exact RSD over all orders.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = DEFAULT_N0)]
        n0: usize,
        /// Attach a lottery over matchings.
        #[arg(long)]
        lottery: bool,
        /// Attach a truthfulness audit with this many misreports per agent.
        #[arg(long)]
        audit: Option<usize>,
    },
    /// Utility-monotonicity factor rho (exact, or a scan over generated instances).
    Rho {
        #[command(flatten)]
        source: Source,
        /// Scan this many generated instances instead of one.
        #[arg(long)]
        trials: Option<usize>,
        /// Also scan the three-agent example.
        #[arg(long)]
        inject_table1: bool,
        /// Use row averages as outside options in every restricted solve.
        #[arg(long)]
        bargaining: bool,
    },
    /// Search for profitable misreports.
    Audit {
        name: String,
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 20)]
        misreports: usize,
        /// Number of generated instances (with --gen).
        #[arg(long, default_value_t = 1)]
        instances: usize,
        #[arg(long, default_value_t = DEFAULT_N0)]
        n0: usize,
    },
    /// Parameters, market bundle and certificates of the lower-bound family.
    Lowerbound {
        #[arg(long, default_value_t = 1)]
        s: usize,
        #[arg(long)]
        certify: bool,
        #[arg(long, value_enum, default_value = "closed-form")]
        rule: RuleArg,
    },
    /// Write a generated instance.
    Gen {
        #[arg(help = GEN_HELP)]
        spec: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Birkhoff-von-Neumann decomposition of an assignment (a matrix or a report with "probs").
    Decompose {
        #[arg(long)]
        assignment: PathBuf,
        /// Draw one matching with this seed.
        #[arg(long)]
        sample: Option<u64>,
    },
}

/// What a run was asked to do; persisted as `run.json` next to every output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub instance: Option<PathBuf>,
    pub generator: Option<String>,
    pub mechanism: Option<String>,
    pub seed: u64,
    pub tol: f64,
    pub n0: Option<usize>,
    pub out: PathBuf,
    pub reps: Option<usize>,
}

fn load_source(src: &Source) -> Result<Instance> {
    match (&src.instance, &src.gen) {
        (Some(p), _) => load_instance(p),
        (None, Some(g)) => g.parse::<GeneratorSpec>()?.generate(src.seed),
        (None, None) => Err(Error::InvalidParameter("give --instance or --gen".into())),
    }
}

fn parse_agents(inst: &Instance, list: &str) -> Result<Vec<usize>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|tok| {
            if let Some(i) = inst.agent_labels().and_then(|l| l.iter().position(|x| x == tok)) {
                return Ok(i);
            }
            tok.parse::<usize>()
                .ok()
                .filter(|&i| i < inst.n_agents())
                .ok_or_else(|| Error::InvalidParameter(format!("unknown agent {tok:?}")))
        })
        .collect()
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{:.6}", x)).collect();
    format!("[{}]", parts.join(", "))
}

fn config(cli: &Cli, command: &str, src: Option<&Source>) -> RunConfig {
    RunConfig {
        command: command.to_string(),
        instance: src.and_then(|s| s.instance.clone()),
        generator: src.and_then(|s| s.gen.clone()),
        mechanism: None,
        seed: src.map_or(0, |s| s.seed),
        tol: cli.tol,
        n0: None,
        out: cli.out.clone(),
        reps: None,
    }
}

fn mechanism_for(name: &str, exact: bool, reps: usize, n0: usize, seed: u64) -> Result<Mechanism> {
    let m = Mechanism::parse(name, n0, seed, None)?;
    Ok(match m {
        Mechanism::Rsd(_) if !exact => Mechanism::Rsd(RsdMode::Sampled { orders: reps.max(1), seed }),
        other => other,
    })
}

/// Execute a parsed command; returns the summary line.
pub fn execute(cli: &Cli) -> Result<String> {
    let out = &cli.out;
    let tol = cli.tol;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    match &cli.command {
        Command::Solve { source, agents, offsets, trace } => {
            let inst = load_source(source)?;
            let mut problem = NswProblem::new(&inst);
            if let Some(list) = agents {
                problem = problem.agents(parse_agents(&inst, list)?);
            }
            if *offsets == OffsetsArg::Uniform {
                problem = problem.offsets(DisagreementPoint::uniform(&inst));
            }
            let opts = NswOptions { tol, trace: *trace, ..NswOptions::default() };
            let sol = solve_with(&problem, &opts)?;
            save_json(&out.join("solution.json"), &sol)?;
            if *trace {
                sol.write_trace_csv(&out.join("trace.csv"))?;
            }
            save_json(&out.join("run.json"), &config(cli, "solve", Some(source)))?;
            let active: Vec<f64> = sol.active_agents.iter().map(|&i| sol.utilities[i]).collect();
            Ok(format!(
                "solve: utilities {} objective {:.9} kkt_residual {:.3e}",
                fmt_vec(&active),
                sol.objective,
                sol.kkt_residual
            ))
        }
        Command::Mech { name, source, reps, exact, n0, lottery, audit } => {
            let inst = load_source(source)?;
            let mech = mechanism_for(name, *exact, *reps, *n0, source.seed)?;
            let bench = benchmark(&inst, tol)?;
            let mut notes = std::collections::BTreeMap::new();
            let (probs, utils, stderr) = match mech {
                Mechanism::Rpi { .. } => {
                    let mc = expected_utilities(&inst, &mech, *reps, source.seed, tol)?;
                    let se = if *reps > 1 { Some(mc.stderr.clone()) } else { None };
                    (mc.mean_probs, mc.mean, se)
                }
                Mechanism::Pa => {
                    let pa = pa_run(&inst, &DisagreementPoint::zeros(inst.n_agents()))?;
                    if !pa.flags.is_empty() {
                        notes.insert("pa_flags".to_string(), pa.flags.join(";"));
                    }
                    notes.insert("pa_fractions".to_string(), fmt_vec(&pa.fractions));
                    let u = utilities(&inst, &pa.assignment)?.to_vec();
                    (pa.assignment.probs, u, None)
                }
                other => {
                    let p = other.run(&inst)?;
                    let u = utilities(&inst, &p)?.to_vec();
                    (p.probs, u, None)
                }
            };
            let ratios = approx_ratio(&utils, &bench.benchmark_utilities);
            let lottery = if *lottery {
                Some(decompose(&FractionalAssignment::from_matrix(probs.clone()), tol.max(1e-9))?)
            } else {
                None
            };
            let audit = match audit {
                Some(k) => Some(truthfulness_audit(&inst, &mech, *k, source.seed)?),
                None => None,
            };
            let mut metadata = ReportMetadata::new(&inst, source.seed, tol);
            metadata.notes = notes;
            let report = MechanismReport {
                mechanism: mech.name().to_string(),
                seed: source.seed,
                probs,
                utilities: utils,
                benchmark_utilities: bench.benchmark_utilities,
                ratios: ratios.per_agent.clone(),
                metadata,
                utility_stderr: stderr,
                lottery,
                audit,
            };
            save_report(&out.join("report.json"), &report)?;
            let mut cfg = config(cli, "mech", Some(source));
            cfg.mechanism = Some(mech.name().to_string());
            cfg.n0 = Some(*n0);
            cfg.reps = Some(*reps);
            save_json(&out.join("run.json"), &cfg)?;
            Ok(format!(
                "mech {}: max ratio {} (agent {}), utilities {}",
                mech.name(),
                ratios.max,
                ratios.worst_agent,
                fmt_vec(&report.utilities)
            ))
        }
        Command::Rho { source, trials, inject_table1, bargaining } => {
            let offsets = if *bargaining { RhoOffsets::Uniform } else { RhoOffsets::Zero };
            let cfg = config(cli, "rho", Some(source));
            save_json(&out.join("run.json"), &cfg)?;
            match trials {
                Some(t) => {
                    let spec: GeneratorSpec = source
                        .gen
                        .as_deref()
                        .ok_or_else(|| Error::InvalidParameter("--trials needs --gen".into()))?
                        .parse()?;
                    let injected = if *inject_table1 { vec![table1()] } else { Vec::new() };
                    let scan = rho_scan(&spec, *t, source.seed, &injected, tol)?;
                    save_json(&out.join("rho_scan.json"), &scan)?;
                    scan.write_histogram_csv(&out.join("rho_histogram.csv"))?;
                    scan.write_trials_csv(&out.join("rho_trials.csv"))?;
                    Ok(format!("rho scan {}: max rho {:.9} over {} instances", spec, scan.max_rho, scan.trials.len()))
                }
                None => {
                    let inst = load_source(source)?;
                    let rep = rho_exact_with(&inst, tol, offsets)?;
                    save_json(&out.join("rho.json"), &rep)?;
                    let names: Vec<String> = rep.witness_subset.iter().map(|&i| inst.agent_name(i)).collect();
                    Ok(format!(
                        "rho: {:.9} (agent {}, subset {{{}}}), half-size rho {:.9}",
                        rep.rho,
                        inst.agent_name(rep.witness_agent),
                        names.join(","),
                        rep.half_size.rho
                    ))
                }
            }
        }
        Command::Audit { name, source, misreports, instances, n0 } => {
            let mech = Mechanism::parse(name, *n0, source.seed, None)?;
            let mut reports = Vec::new();
            let count = if source.gen.is_some() { (*instances).max(1) } else { 1 };
            for k in 0..count {
                let s = if count == 1 { source.seed } else { crate::instances::split_seed(source.seed, k as u64) };
                let inst = load_source(&Source { seed: s, ..source.clone() })?;
                reports.push(truthfulness_audit(&inst, &mech.with_seed(s), *misreports, s)?);
            }
            save_json(&out.join("audit.json"), &reports)?;
            let mut cfg = config(cli, "audit", Some(source));
            cfg.mechanism = Some(mech.name().to_string());
            save_json(&out.join("run.json"), &cfg)?;
            let worst = reports.iter().map(|r| r.worst_gain).fold(f64::NEG_INFINITY, f64::max);
            let tried: usize = reports.iter().map(|r| r.misreports_tried).sum();
            Ok(format!("audit {}: worst gain {:.3e} over {} misreports", mech.name(), worst, tried))
        }
        Command::Lowerbound { s, certify, rule } => {
            let rule = match rule {
                RuleArg::ClosedForm => SfRule::ClosedForm,
                RuleArg::Derived => SfRule::Derived,
            };
            let lb = gen_lowerbound_with(*s, rule)?;
            lb.market.write_bundle(&lb.params, out)?;
            let mut summary = format!(
                "lowerbound s={}: k0={} agents={} loser ratio {}",
                s,
                lb.params.k0,
                lb.params.n_agents,
                lb.market.loser_ratio()
            );
            if *certify {
                let mut reports = Vec::new();
                for t in lb.market.tables() {
                    for eq in [Equilibrium::Initial, Equilibrium::Final] {
                        reports.push(lb.market.certify(t, eq));
                    }
                }
                let worst = reports.iter().map(|r| r.residual).fold(0.0, f64::max);
                save_json(&out.join("certificates.json"), &reports)?;
                summary.push_str(&format!(", max certificate residual {worst:.3e}"));
            }
            Ok(summary)
        }
        Command::Gen { spec, seed } => {
            let g: GeneratorSpec = spec.parse()?;
            let inst = g.generate(*seed)?;
            let path = out.join("instance.json");
            save_instance(&path, &inst)?;
            Ok(format!("gen {g}: {}x{} instance -> {}", inst.n_agents(), inst.n_items(), path.display()))
        }
        Command::Decompose { assignment, sample: draw } => {
            let probs = load_assignment(assignment)?;
            let lottery = decompose(&FractionalAssignment::from_matrix(probs), tol.max(1e-9))?;
            save_json(&out.join("lottery.json"), &lottery)?;
            let mut summary = format!("decompose: {} terms, residual {:.3e}", lottery.terms.len(), lottery.residual);
            if let Some(seed) = draw {
                let m: Vec<i64> = sample(&lottery, *seed).iter().map(|j| j.map_or(-1, |j| j as i64)).collect();
                summary.push_str(&format!(", sample {m:?}"));
            }
            Ok(summary)
        }
    }
}

fn load_assignment(path: &Path) -> Result<Matrix> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Input {
        Bare(Matrix),
        Wrapped { probs: Matrix },
    }
    Ok(match load_json::<Input>(path)? {
        Input::Bare(m) | Input::Wrapped { probs: m } => m,
    })
}

/// Parse, run and report; returns the process exit code (0 ok, 1 input error, 2 solver failure).
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_solver_failure() {
                2
            } else {
                1
            }
        }
    }
}
