//! Batch interface: load market and utility files, run the solvers and
//! order checks, emit JSON reports and plot-ready gap curves.
//!
//! Exit codes: 0 when the computation succeeded (the verdict, pass or fail,
//! lives in the report), 2 on invalid parameters or malformed files, 1 on
//! runtime failures.

use clap::{Parser, Subcommand, ValueEnum};
use riskorder::{
    build_base_example, build_paper_example, check_centered_convex,
    check_centered_convex_statistical, check_convex, check_euler_order, check_mc, default_tol,
    euler_product_dist, gap_curve, mc_product_sample, optimal_fraction, perturb,
    solve_complete_dual, solve_dp, ControlKind, DiscreteDist, EventTree, GapPoint, IidError,
    IncrementDist, OrderVerdict, ProbConvention, Solution, SolveError, TreeError, UtilitySpec,
};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "riskorder",
    version,
    about = "Expected-utility portfolio optimization on event trees and stochastic-order checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Backward induction; works on any arbitrage-free tree.
    Dp,
    /// First-order condition under the unique martingale measure; complete
    /// trees only.
    Dual,
}

#[derive(Clone, Copy, ValueEnum)]
enum RelationArg {
    /// Monotone convex order.
    Mc,
    /// Convex order (monotone convex with equal means).
    C,
    /// Convex order between the centered laws.
    CenteredC,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    /// Root probabilities (0.6, eps, 0.4) / (1 + eps).
    Normalized,
    /// Root probabilities (0.6, eps, 0.4 - eps).
    Deducted,
}

impl From<ConventionArg> for ProbConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Normalized => ProbConvention::Normalized,
            ConventionArg::Deducted => ProbConvention::Deducted,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the utility maximization problem on an event tree.
    Solve {
        /// Market model: {"horizon":T,"nodes":[{"id","parent","prob","price","time"},...]}
        #[arg(long)]
        tree: PathBuf,
        /// Utility: {"kind":"power","p":0.9} | {"kind":"log"} | {"kind":"exp","gamma":1.5}
        #[arg(long)]
        utility: PathBuf,
        /// Initial capital.
        #[arg(long)]
        x0: f64,
        #[arg(long, value_enum, default_value = "dp")]
        method: Method,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a stochastic order between two distribution files.
    Order {
        /// Left distribution X: {"atoms":[{"x":..,"p":..},...]}
        #[arg(long)]
        x: PathBuf,
        /// Right distribution Y (the candidate dominating law).
        #[arg(long)]
        y: PathBuf,
        #[arg(long, value_enum, default_value = "mc")]
        relation: RelationArg,
        /// Order tolerance; default 1e-9 scaled by the means.
        #[arg(long)]
        tol: Option<f64>,
        /// Write the call-gap curve (kinks + 50 fill strikes) as CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the perturbed two-period market, solve both investors and test
    /// the monotone convex order between their terminal payoffs.
    Counterexample {
        /// Probability of the inserted branch; 0 reproduces the base model.
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        /// Crash probability inside the inserted branch.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Jump factor of the inserted branch.
        #[arg(long, default_value_t = 20.0)]
        k_factor: f64,
        /// Relative risk aversion of the more risk averse investor.
        #[arg(long, default_value_t = 0.9)]
        p_more: f64,
        /// Relative risk aversion of the less risk averse investor.
        #[arg(long, default_value_t = 0.3)]
        p_less: f64,
        #[arg(long, default_value_t = 1.0)]
        x0: f64,
        #[arg(long, value_enum, default_value = "normalized")]
        prob_convention: ConventionArg,
        #[arg(long)]
        tol: Option<f64>,
        /// Write the call-gap curve between the two terminal laws as CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split last-period nodes of a tree by a small-probability coin flip.
    Perturb {
        #[arg(long)]
        tree: PathBuf,
        /// Coin probability of the inserted branch.
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        k_factor: f64,
        /// Level to perturb; defaults to horizon - 1.
        #[arg(long)]
        time: Option<u32>,
        /// Node ids to split (comma separated); defaults to every node at
        /// the target level.
        #[arg(long, value_delimiter = ',')]
        nodes: Option<Vec<u64>>,
        /// Write the perturbed tree here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare two power investors' centered terminal products in an
    /// i.i.d.-return market: exact enumeration or seeded Monte Carlo.
    Iid {
        /// One-period return law: {"atoms":[{"x":..,"p":..},...]}
        #[arg(long)]
        increment: PathBuf,
        #[arg(long)]
        p_more: f64,
        #[arg(long)]
        p_less: f64,
        #[arg(long)]
        periods: u32,
        /// Monte Carlo sample size; switches the command to statistical mode.
        #[arg(long, requires = "seed")]
        paths: Option<usize>,
        /// Seed for Monte Carlo sampling (required with --paths).
        #[arg(long, requires = "paths")]
        seed: Option<u64>,
        /// Exact-mode order tolerance; default 1e-9 scaled by the means.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    /// Invalid parameters or malformed files: exit code 2.
    Invalid(String),
    /// Computation failed: exit code 1.
    Runtime(String),
}

type CliResult<T> = Result<T, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("malformed {}: {e}", path.display())))
}

fn emit<T: Serialize>(report: &T, out: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Failure::Runtime(format!("serialization failed: {e}")))?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_curve(path: &Path, points: &[GapPoint]) -> CliResult<()> {
    let mut text = String::from("strike,call_x,call_y,gap\n");
    for p in points {
        text.push_str(&format!("{},{},{},{}\n", p.strike, p.call_x, p.call_y, p.gap));
    }
    std::fs::write(path, text)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn check_tol(tol: Option<f64>) -> CliResult<Option<f64>> {
    if let Some(t) = tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(invalid(format!("tolerance {t} must be strictly positive")));
        }
    }
    Ok(tol)
}

fn solve_failure(e: SolveError) -> Failure {
    match e {
        SolveError::Tree(_) | SolveError::Utility(_) | SolveError::BadInitialCapital(_) => {
            invalid(e.to_string())
        }
        other => Failure::Runtime(other.to_string()),
    }
}

#[derive(Serialize)]
struct NodeControl {
    node: u64,
    control: f64,
}

#[derive(Serialize)]
struct NodeWealth {
    node: u64,
    wealth: f64,
}

#[derive(Serialize)]
struct SolutionReport {
    method: &'static str,
    control_kind: ControlKind,
    controls: Vec<NodeControl>,
    wealth: Vec<NodeWealth>,
    terminal_dist: DiscreteDist,
    value: f64,
    multiplier: Option<f64>,
}

fn solution_report(tree: &EventTree, sol: &Solution, method: &'static str) -> SolutionReport {
    let controls = sol
        .policy
        .controls
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|control| NodeControl { node: tree.node(i).id, control }))
        .collect();
    let wealth = sol
        .wealth
        .iter()
        .enumerate()
        .map(|(i, &wealth)| NodeWealth { node: tree.node(i).id, wealth })
        .collect();
    SolutionReport {
        method,
        control_kind: sol.policy.kind,
        controls,
        wealth,
        terminal_dist: sol.terminal_dist.clone(),
        value: sol.value,
        multiplier: sol.multiplier,
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Solve { tree, utility, x0, method, out } => {
            let tree: EventTree = read_json(&tree)?;
            let report = tree.validate();
            if !report.passes() {
                return Err(invalid(format!(
                    "tree admits one-step arbitrage at nodes {:?}",
                    report.arbitrage_nodes
                )));
            }
            let u: UtilitySpec = read_json(&utility)?;
            let (sol, name) = match method {
                Method::Dp => (solve_dp(&tree, &u, x0).map_err(solve_failure)?, "dp"),
                Method::Dual => (solve_complete_dual(&tree, &u, x0).map_err(solve_failure)?, "dual"),
            };
            emit(&solution_report(&tree, &sol, name), out.as_deref())
        }

        Command::Order { x, y, relation, tol, curve, out } => {
            let x: DiscreteDist = read_json(&x)?;
            let y: DiscreteDist = read_json(&y)?;
            let tol = check_tol(tol)?.unwrap_or_else(|| default_tol(&x, &y));
            let verdict = match relation {
                RelationArg::Mc => check_mc(&x, &y, tol),
                RelationArg::C => check_convex(&x, &y, tol),
                RelationArg::CenteredC => check_centered_convex(&x, &y, tol),
            };
            if let Some(path) = curve {
                let (cx, cy) = match relation {
                    RelationArg::CenteredC => (x.center(), y.center()),
                    _ => (x.clone(), y.clone()),
                };
                write_curve(&path, &gap_curve(&cx, &cy, 50))?;
            }
            emit(&verdict, out.as_deref())
        }

        Command::Counterexample {
            eps,
            alpha,
            k_factor,
            p_more,
            p_less,
            x0,
            prob_convention,
            tol,
            curve,
            out,
        } => {
            if !(p_more > p_less && p_less > 0.0) {
                return Err(invalid(format!(
                    "risk aversions must satisfy p_more > p_less > 0, got {p_more} and {p_less}"
                )));
            }
            let convention: ProbConvention = prob_convention.into();
            let tree = if eps == 0.0 {
                build_base_example()
            } else {
                build_paper_example(eps, alpha, k_factor, convention)
                    .map_err(|e| invalid(e.to_string()))?
            };
            let u_more = UtilitySpec::power(p_more).map_err(|e| invalid(e.to_string()))?;
            let u_less = UtilitySpec::power(p_less).map_err(|e| invalid(e.to_string()))?;
            let sol_more = solve_dp(&tree, &u_more, x0).map_err(solve_failure)?;
            let sol_less = solve_dp(&tree, &u_less, x0).map_err(solve_failure)?;

            // the inserted time-1 node is the one that still branches
            let inserted = tree
                .level(1)
                .iter()
                .copied()
                .find(|&i| tree.children(i).len() == 2);
            let root = tree.root();
            let law_more = sol_more.terminal_dist.clone();
            let law_less = sol_less.terminal_dist.clone();
            let tol = check_tol(tol)?.unwrap_or_else(|| default_tol(&law_more, &law_less));
            let verdict = check_mc(&law_more, &law_less, tol);
            if let Some(path) = curve {
                write_curve(&path, &gap_curve(&law_more, &law_less, 50))?;
            }

            #[derive(Serialize)]
            struct Fractions {
                time0_more_averse: f64,
                time0_less_averse: f64,
                inserted_more_averse: Option<f64>,
                inserted_less_averse: Option<f64>,
            }
            #[derive(Serialize)]
            struct Report {
                eps: f64,
                alpha: f64,
                k_factor: f64,
                p_more: f64,
                p_less: f64,
                x0: f64,
                prob_convention: ProbConvention,
                tol: f64,
                fractions: Fractions,
                max_payoff_more_averse: f64,
                max_payoff_less_averse: f64,
                law_more_averse: DiscreteDist,
                law_less_averse: DiscreteDist,
                verdict: OrderVerdict,
            }
            let report = Report {
                eps,
                alpha,
                k_factor,
                p_more,
                p_less,
                x0,
                prob_convention: convention,
                tol,
                fractions: Fractions {
                    time0_more_averse: sol_more.policy.controls[root].unwrap_or(0.0),
                    time0_less_averse: sol_less.policy.controls[root].unwrap_or(0.0),
                    inserted_more_averse: inserted.and_then(|i| sol_more.policy.controls[i]),
                    inserted_less_averse: inserted.and_then(|i| sol_less.policy.controls[i]),
                },
                max_payoff_more_averse: law_more.max_value(),
                max_payoff_less_averse: law_less.max_value(),
                law_more_averse: law_more,
                law_less_averse: law_less,
                verdict,
            };
            emit(&report, out.as_deref())
        }

        Command::Perturb { tree, eps, alpha, k_factor, time, nodes, output } => {
            let tree: EventTree = read_json(&tree)?;
            let target = time.unwrap_or_else(|| tree.horizon().saturating_sub(1));
            let selected = perturb(&tree, target, |n| match &nodes {
                Some(ids) => ids.contains(&n.id),
                None => true,
            }, eps, alpha, k_factor)
            .map_err(|e| match e {
                TreeError::BadParameter { .. }
                | TreeError::PerturbTime { .. }
                | TreeError::NoNodeSelected => invalid(e.to_string()),
                other => Failure::Runtime(other.to_string()),
            })?;
            emit(&selected, output.as_deref())
        }

        Command::Iid { increment, p_more, p_less, periods, paths, seed, tol, curve, out } => {
            if !(p_more > p_less && p_less > 0.0) {
                return Err(invalid(format!(
                    "risk aversions must satisfy p_more > p_less > 0, got {p_more} and {p_less}"
                )));
            }
            let inc: IncrementDist = read_json(&increment)?;
            let pi_more = optimal_fraction(&inc, p_more).map_err(|e| invalid(e.to_string()))?;
            let pi_less = optimal_fraction(&inc, p_less).map_err(|e| invalid(e.to_string()))?;
            let tol = check_tol(tol)?;

            #[derive(Serialize)]
            struct Report {
                mode: &'static str,
                periods: u32,
                p_more: f64,
                p_less: f64,
                pi_more: f64,
                pi_less: f64,
                paths: Option<usize>,
                seed: Option<u64>,
                verdict: OrderVerdict,
            }

            let exact_laws = if paths.is_none() {
                match (
                    euler_product_dist(&inc, pi_more, periods),
                    euler_product_dist(&inc, pi_less, periods),
                ) {
                    (Ok(x), Ok(y)) => Some((x, y)),
                    (Err(IidError::EnumerationCap { outcomes }), _)
                    | (_, Err(IidError::EnumerationCap { outcomes })) => {
                        return Err(invalid(format!(
                            "exact enumeration needs {outcomes:.0} outcomes; pass --paths and --seed for Monte Carlo"
                        )))
                    }
                    (Err(e), _) | (_, Err(e)) => return Err(Failure::Runtime(e.to_string())),
                }
            } else {
                None
            };

            let report = match exact_laws {
                Some((x, y)) => {
                    let tol = tol.unwrap_or_else(|| default_tol(&x, &y));
                    let verdict = check_euler_order(&inc, pi_more, pi_less, periods, tol)
                        .map_err(|e| invalid(e.to_string()))?;
                    if let Some(path) = curve {
                        write_curve(&path, &gap_curve(&x, &y, 50))?;
                    }
                    Report {
                        mode: "exact",
                        periods,
                        p_more,
                        p_less,
                        pi_more,
                        pi_less,
                        paths: None,
                        seed: None,
                        verdict,
                    }
                }
                None => {
                    let paths = paths.expect("paths present in Monte Carlo mode");
                    let seed = seed.expect("clap enforces seed with paths");
                    // the same seed couples the return draws of both agents
                    let x = mc_product_sample(&inc, pi_more, periods, paths, seed)
                        .map_err(|e| invalid(e.to_string()))?;
                    let y = mc_product_sample(&inc, pi_less, periods, paths, seed)
                        .map_err(|e| invalid(e.to_string()))?;
                    let verdict =
                        check_centered_convex_statistical(&x, &y, riskorder::iid::STATISTICAL_Z);
                    if let Some(path) = curve {
                        write_curve(&path, &gap_curve(&x.law.center(), &y.law.center(), 50))?;
                    }
                    Report {
                        mode: "monte-carlo",
                        periods,
                        p_more,
                        p_less,
                        pi_more,
                        pi_less,
                        paths: Some(paths),
                        seed: Some(seed),
                        verdict,
                    }
                }
            };
            emit(&report, out.as_deref())
        }
    }
}
