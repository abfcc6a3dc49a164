use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fluidsched::optimizer::{
    nullification_objective, nullification_stationarity, oracle_minimize, oracle_solve,
    solve_minmax_mean_delay, solve_nullification, solve_sum_mean_delay, verify_kkt,
    verify_level_equalization, Aggregate, NullVariant, OracleMode, SeparableObjective, SolveResult,
    SumDelayProblem, Term,
};
use fluidsched::simulator::{compare_policies, generate_trace, Policy, SimulationRun};
use fluidsched::{classify_state, feasible_box, Error, Infeasibility, SystemState};

use crate::files::{parse_trace, ParseError, StateFile};
use crate::report::{
    epoch_rows, write_csv, write_summary_csv, Certificate, ClassifyReport, SimulationReport,
    SolveReport, VerifyReport, SCHEMA_VERSION,
};

/// Exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INVARIANT: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const IO: i32 = 4;
}

#[derive(Debug, Parser)]
#[command(
    name = "fluidsched",
    version,
    about = "Fluid-model capacity allocation across task pipes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate totals, criteria verdicts and the feasible box of a state.
    Classify {
        state: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Solve an allocation problem for a state.
    Solve(SolveArgs),
    /// Simulate one policy on a trace.
    Simulate(SimulateArgs),
    /// Simulate several policies on the same trace.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Problem {
    /// Minimize the sum of mean delays (steady states).
    Sum,
    /// Minimize the largest mean delay (steady states).
    Minmax,
    /// Nullify every queue, minimizing the sum of mean delays.
    NullSum,
    /// Nullify every queue, minimizing the largest mean delay.
    NullMinmax,
}

impl Problem {
    fn name(self) -> &'static str {
        match self {
            Problem::Sum => "sum",
            Problem::Minmax => "minmax",
            Problem::NullSum => "null-sum",
            Problem::NullMinmax => "null-minmax",
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    state: PathBuf,
    #[arg(long, value_enum, default_value = "sum")]
    problem: Problem,
    /// Cross-check against a reference oracle and an optimality certificate.
    #[arg(long)]
    verify: bool,
    /// Lattice step of the reference oracle for sum objectives.
    #[arg(long, default_value_t = 1e-4)]
    oracle_step: f64,
    /// Final step of the coarse-to-fine oracle for min-max objectives.
    #[arg(long, default_value_t = 1e-9)]
    refine_step: f64,
    /// Tolerance of the optimality certificate.
    #[arg(long, default_value_t = 1e-8)]
    kkt_tol: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    state: PathBuf,
    trace: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: u64,
    /// Overrides the seed of the trace file.
    #[arg(long, env = "FLUIDSCHED_SEED")]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// sum-optimal, minmax-optimal, equal-split, proportional-backlog,
    /// proportional-intensity or static:w1,w2,...
    #[arg(long, default_value = "sum-optimal")]
    policy: String,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Repeat for each policy; all built-in policies when absent.
    #[arg(long = "policy")]
    policies: Vec<String>,
    /// Also write per-policy aggregates as CSV to this file.
    #[arg(long)]
    summary: Option<PathBuf>,
}

/// A failed command: message for standard error and exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, err: io::Error) -> Self {
        Failure::new(exit::IO, format!("{}: {err}", path.display()))
    }

    fn parse(path: &Path, err: ParseError) -> Self {
        Failure::new(exit::PARSE, format!("{}: {err}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match &err {
            Error::Infeasible(why) => Failure::new(exit::INFEASIBLE, infeasibility_message(why)),
            Error::Domain(_) | Error::Trace(_) => Failure::new(exit::INVARIANT, err.to_string()),
        }
    }
}

fn infeasibility_message(why: &Infeasibility) -> String {
    let criterion = match why {
        Infeasibility::NotDecomposable { .. } => "criterion 1 (common decomposability)",
        Infeasibility::LowerBoundsExceedBudget { .. } => "criterion 2 (overfill avoidability)",
        Infeasibility::UpperBoundsBelowBudget { .. } => {
            "steadiness (state is strictly decomposable; use null-sum or null-minmax)"
        }
    };
    format!("infeasible ({criterion}): {why}")
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Classify { state, json } => {
            let text = classify(&state, json)?;
            write_stdout(&mut io::stdout().lock(), text.as_bytes())
        }
        Command::Solve(args) => {
            let text = solve(&args)?;
            write_stdout(&mut io::stdout().lock(), text.as_bytes())
        }
        Command::Simulate(args) => {
            let policy = parse_policy(&args.policy)?;
            simulate(&args.run, &[policy], None)
        }
        Command::Compare(args) => {
            let policies = if args.policies.is_empty() {
                vec![
                    Policy::SumOptimal,
                    Policy::MinMaxOptimal,
                    Policy::EqualSplit,
                    Policy::ProportionalToBacklog,
                    Policy::ProportionalToIntensity,
                ]
            } else {
                args.policies
                    .iter()
                    .map(|p| parse_policy(p))
                    .collect::<Result<_, _>>()?
            };
            simulate(&args.run, &policies, args.summary.as_deref())
        }
    }
}

fn write_stdout(out: &mut impl Write, bytes: &[u8]) -> Result<(), Failure> {
    out.write_all(bytes)
        .map_err(|e| Failure::new(exit::IO, format!("standard output: {e}")))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn load_state(path: &Path) -> Result<(StateFile, SystemState), Failure> {
    let file = StateFile::parse(&read(path)?).map_err(|e| Failure::parse(path, e))?;
    let state = file
        .to_state()
        .map_err(|e| Failure::new(exit::INVARIANT, format!("{}: {e}", path.display())))?;
    Ok((file, state))
}

fn parse_policy(name: &str) -> Result<Policy, Failure> {
    name.parse()
        .map_err(|e: Error| Failure::new(exit::PARSE, format!("--policy: {e}")))
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn classify(path: &Path, as_json: bool) -> Result<String, Failure> {
    let (file, state) = load_state(path)?;
    let class = classify_state(&state);
    let bounds = feasible_box(&state);
    let report = ClassifyReport::new(&class, &bounds, state.t_upd());
    if as_json {
        return Ok(json(&report));
    }
    let yes = |b: bool| if b { "yes" } else { "no" };
    let mut s = String::new();
    let _ = writeln!(s, "pipes                {}", state.len());
    let _ = writeln!(s, "A (total intensity)  {}", report.total_intensity);
    let _ = writeln!(s, "B (total backlog)    {}", report.total_backlog);
    let _ = writeln!(s, "A + B/t_upd          {}", report.nullifying_total);
    let _ = writeln!(
        s,
        "criterion 1  common decomposability  {}",
        yes(class.decomposable)
    );
    let _ = writeln!(
        s,
        "criterion 2  overfill avoidability   {}",
        yes(class.avoidable)
    );
    let _ = writeln!(
        s,
        "criterion 3  nonincreasability       {}",
        yes(class.nonincreasable)
    );
    let _ = writeln!(s, "steady               {}", yes(class.steady));
    let nodrop: Vec<String> = class.nodrop_pipes.iter().map(|&i| file.label(i)).collect();
    let _ = writeln!(s, "no-drop pipes        [{}]", nodrop.join(", "));
    let _ = writeln!(s, "feasible box");
    for i in 0..state.len() {
        let _ = writeln!(
            s,
            "  {:<12} [{}, {}]",
            file.label(i),
            bounds.lo[i],
            bounds.hi[i]
        );
    }
    let _ = writeln!(s, "polytope nonempty    {}", yes(report.polytope_nonempty));
    Ok(s)
}

fn solve(args: &SolveArgs) -> Result<String, Failure> {
    for (flag, step) in [
        ("--oracle-step", args.oracle_step),
        ("--refine-step", args.refine_step),
    ] {
        if !(step.is_finite() && step > 0.0) {
            return Err(Failure::new(
                exit::PARSE,
                format!("{flag} must be positive"),
            ));
        }
    }
    let (file, state) = load_state(&args.state)?;
    let report = match args.problem {
        Problem::Sum | Problem::Minmax => {
            let problem = SumDelayProblem::from_state(&state)?;
            let result = if args.problem == Problem::Sum {
                solve_sum_mean_delay(&problem)?
            } else {
                solve_minmax_mean_delay(&problem)?
            };
            let mut report = SolveReport::new(args.problem.name(), &result);
            if args.verify {
                report.verify = Some(verify_box_problem(args, &problem, &result)?);
            }
            report
        }
        Problem::NullSum | Problem::NullMinmax => {
            let variant = if args.problem == Problem::NullSum {
                NullVariant::Sum
            } else {
                NullVariant::MinMax
            };
            let result = solve_nullification(variant, &state)?;
            let mut report = SolveReport::new(args.problem.name(), &result);
            if args.verify {
                report.verify = Some(verify_null_problem(args, variant, &state, &result)?);
            }
            report
        }
    };
    if args.json {
        return Ok(json(&report));
    }
    let mut s = String::new();
    let _ = writeln!(s, "problem        {}", report.problem);
    let _ = writeln!(s, "allocation");
    for (i, w) in report.w.iter().enumerate() {
        let _ = writeln!(s, "  {:<12} {w}", file.label(i));
    }
    let _ = writeln!(s, "objective      {}", report.objective);
    let faces: Vec<String> = report
        .active_faces
        .iter()
        .map(|f| format!("{}:{}", file.label(f.pipe), f.side))
        .collect();
    let _ = writeln!(s, "active faces   [{}]", faces.join(", "));
    let _ = writeln!(s, "nodes visited  {}", report.nodes_visited);
    if let Some(v) = &report.verify {
        let _ = writeln!(
            s,
            "oracle         {} objective {}",
            v.oracle, v.oracle_objective
        );
        let _ = writeln!(s, "  objective delta  {:e}", v.objective_delta);
        let _ = writeln!(s, "  max |w| delta    {:e}", v.max_w_delta);
        let c = &v.certificate;
        let verdict = if c.satisfied { "pass" } else { "FAIL" };
        let _ = write!(
            s,
            "certificate    {} {verdict} (tol {:e})",
            c.kind, c.tolerance
        );
        if let Some(r) = c.residual {
            let _ = write!(s, ", residual {r:e}");
        }
        if let Some(d) = &c.diagnostic {
            let _ = write!(s, ": {d}");
        }
        s.push('\n');
    }
    Ok(s)
}

fn max_delta(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn verify_box_problem(
    args: &SolveArgs,
    problem: &SumDelayProblem,
    result: &SolveResult,
) -> Result<VerifyReport, Failure> {
    let (oracle, mode, certificate) = if args.problem == Problem::Sum {
        let kkt = verify_kkt(problem, &result.w, args.kkt_tol);
        (
            "lattice",
            OracleMode::Lattice {
                step: args.oracle_step,
            },
            Certificate::from_kkt("kkt", kkt, args.kkt_tol),
        )
    } else {
        let levels: Vec<f64> = problem
            .c()
            .iter()
            .zip(&result.w)
            .map(|(c, w)| c / w)
            .collect();
        let b = problem.bounds();
        let report = verify_level_equalization(
            &levels,
            &result.w,
            &b.lo,
            &b.hi,
            problem.budget(),
            args.kkt_tol,
        );
        (
            "refined grid",
            OracleMode::Refined {
                step: args.refine_step,
            },
            Certificate::from_kkt("level_equalization", report, args.kkt_tol),
        )
    };
    let reference = if args.problem == Problem::Sum {
        oracle_solve(problem, mode)?
    } else {
        let objective = SeparableObjective {
            terms: problem
                .c()
                .iter()
                .map(|&c| Term::Reciprocal { c })
                .collect(),
            aggregate: Aggregate::Max,
        };
        let b = problem.bounds();
        oracle_minimize(&objective, &b.lo, &b.hi, problem.budget(), mode)?
    };
    Ok(VerifyReport {
        oracle: oracle.to_string(),
        oracle_objective: reference.objective,
        objective_delta: reference.objective - result.objective,
        max_w_delta: max_delta(&reference.w, &result.w),
        certificate,
    })
}

fn verify_null_problem(
    args: &SolveArgs,
    variant: NullVariant,
    state: &SystemState,
    result: &SolveResult,
) -> Result<VerifyReport, Failure> {
    let (objective, lo, hi) = nullification_objective(state, variant);
    let (oracle, mode, certificate) = match variant {
        NullVariant::Sum => {
            let residual = nullification_stationarity(state, &result.w);
            (
                "lattice",
                OracleMode::Lattice {
                    step: args.oracle_step,
                },
                Certificate {
                    kind: "stationarity",
                    satisfied: residual < args.kkt_tol,
                    tolerance: args.kkt_tol,
                    multiplier: None,
                    residual: Some(residual),
                    diagnostic: None,
                },
            )
        }
        NullVariant::MinMax => {
            let levels = objective.levels(&result.w);
            let report = verify_level_equalization(&levels, &result.w, &lo, &hi, 1.0, args.kkt_tol);
            (
                "refined grid",
                OracleMode::Refined {
                    step: args.refine_step,
                },
                Certificate::from_kkt("level_equalization", report, args.kkt_tol),
            )
        }
    };
    let reference = oracle_minimize(&objective, &lo, &hi, 1.0, mode)?;
    Ok(VerifyReport {
        oracle: oracle.to_string(),
        oracle_objective: reference.objective,
        objective_delta: reference.objective - result.objective,
        max_w_delta: max_delta(&reference.w, &result.w),
        certificate,
    })
}

fn simulate(args: &RunArgs, policies: &[Policy], summary: Option<&Path>) -> Result<(), Failure> {
    let (_, state) = load_state(&args.state)?;
    let mut spec = parse_trace(&read(&args.trace)?).map_err(|e| Failure::parse(&args.trace, e))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let trace = generate_trace(&spec)
        .map_err(|e| Failure::new(exit::INVARIANT, format!("{}: {e}", args.trace.display())))?;
    let epochs = args.epochs as usize;
    let comparison = compare_policies(&state, &trace, policies, epochs)?;
    let rows: Vec<_> = comparison.runs.iter().flat_map(epoch_rows).collect();

    let mut buf = Vec::new();
    match args.format {
        Format::Csv => write_csv(&rows, &mut buf)
            .map_err(|e| Failure::new(exit::IO, format!("writing CSV: {e}")))?,
        Format::Json => buf.extend_from_slice(
            json(&SimulationReport {
                schema_version: SCHEMA_VERSION,
                epochs,
                seed: spec.seed,
                summaries: comparison.summaries.clone(),
                rows,
            })
            .as_bytes(),
        ),
    }
    match &args.out {
        Some(path) => fs::write(path, &buf).map_err(|e| Failure::io(path, e))?,
        None => write_stdout(&mut io::stdout().lock(), &buf)?,
    }
    if let Some(path) = summary {
        let mut s = Vec::new();
        write_summary_csv(&comparison.summaries, &mut s)
            .map_err(|e| Failure::new(exit::IO, format!("writing CSV: {e}")))?;
        fs::write(path, s).map_err(|e| Failure::io(path, e))?;
    }
    if policies.len() > 1 || comparison.runs.iter().any(|r| r.fallbacks() > 0) {
        eprint!("{}", summary_table(&comparison.runs));
    }
    Ok(())
}

fn summary_table(runs: &[SimulationRun]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24} {:>16} {:>14} {:>16} {:>9}",
        "policy", "sum mean delay", "total drops", "epoch-0 pred.", "fallbacks"
    );
    for r in runs {
        let _ = writeln!(
            s,
            "{:<24} {:>16.6} {:>14.6} {:>16.6} {:>9}",
            r.policy,
            r.sum_mean_delay(),
            r.total_drops(),
            r.first_predicted_sum(),
            r.fallbacks()
        );
    }
    s
}
