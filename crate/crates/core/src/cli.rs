//! Command-line front end.
//!
//! Exit status: 0 on success, 1 when arguments fail validation, 2 on a
//! numerical failure (failed trajectory, or a study row where every sample
//! failed). Output is assembled in memory first, so invalid input never
//! leaves a partial output file behind.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::btree::{deterministic_order, predicted_sde_order, ORDER_CONDITION_TOL};
use crate::driving::{generate_path, WeakOrder};
use crate::error::{Error, Result};
use crate::problems::{named_problem, SdeProblem};
use crate::solver::{integrate, StageSolveConfig};
use crate::study::{
    invariant_drift_study, mean_square_study, weak_study, write_drift_csv, ConvergenceReport, StudyConfig,
    WeakEstimator, WeakFunctional,
};
use crate::tableau::{all_builtins, builtin, load_tableau, ButcherTableau};

#[derive(Debug, Parser)]
#[command(
    name = "strat-rk",
    version,
    about = "Runge-Kutta methods for single-integrand Stratonovich SDEs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in methods with their deterministic and SDE orders.
    ListMethods(ListArgs),
    /// Check order conditions over rooted trees.
    Order(OrderArgs),
    /// Mean-square convergence study.
    Converge(StudyArgs),
    /// Weak convergence study with discrete increments.
    ConvergeWeak(WeakArgs),
    /// Integrate one seeded path and dump the trajectory.
    Trajectory(TrajectoryArgs),
    /// Track invariant drift along one long trajectory per method.
    Invariants(InvariantArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    /// Surrogate when the problem has an exact solution, plain otherwise.
    Auto,
    Plain,
    Surrogate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FunctionalArg {
    /// g(x) = x_1
    X1,
    /// g(x) = |x|^2
    Norm2,
}

#[derive(Debug, Args)]
pub struct ListArgs {
    /// Extra tableau files (JSON) to include.
    #[arg(long = "tableau-file")]
    pub tableau_file: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OrderArgs {
    /// Comma-separated method names.
    #[arg(long)]
    pub method: String,
    /// Largest tree order to check (1..=12).
    #[arg(long, default_value_t = 8)]
    pub max_check: usize,
    #[arg(long = "tableau-file")]
    pub tableau_file: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// sinh | kubo | rigid_body
    #[arg(long, default_value = "sinh")]
    pub problem: String,
    /// Noise scale; defaults to 0.8 (sinh), 1.0 (kubo), 0.5 (rigid_body).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Kubo frequency.
    #[arg(long)]
    pub a: Option<f64>,
}

impl ProblemArgs {
    fn build(&self) -> Result<SdeProblem> {
        if self.a.is_some() && self.problem != "kubo" {
            return Err(Error::InvalidConfig("--a only applies to --problem kubo".into()));
        }
        let sigma = self.sigma.unwrap_or(match self.problem.as_str() {
            "kubo" => 1.0,
            "rigid_body" => 0.5,
            _ => 0.8,
        });
        named_problem(&self.problem, sigma, self.a.unwrap_or(1.0))
    }
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated method names.
    #[arg(long)]
    pub method: String,
    /// Number of Monte Carlo samples.
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Level the Wiener paths are generated at.
    #[arg(long, default_value_t = 9)]
    pub finest_level: u32,
    /// Levels to evaluate, as `a-b` or a comma list.
    #[arg(long, default_value = "4-9")]
    pub levels: String,
    #[arg(long, default_value_t = crate::study::DEFAULT_ERROR_FLOOR)]
    pub error_floor: f64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long = "tableau-file")]
    pub tableau_file: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WeakArgs {
    #[command(flatten)]
    pub study: StudyArgs,
    /// Moment order of the discrete increments (1 or 2).
    #[arg(long, default_value_t = 2)]
    pub weak_order: u32,
    #[arg(long, value_enum, default_value_t = FunctionalArg::X1)]
    pub functional: FunctionalArg,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Auto)]
    pub estimator: EstimatorArg,
    /// Closed-form E g(X(T)); computed by quadrature when omitted.
    #[arg(long)]
    pub reference: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// A single method name.
    #[arg(long)]
    pub method: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Integration level; step (T - t0) / 2^level.
    #[arg(long, default_value_t = 10)]
    pub level: u32,
    /// Level the path is generated at; defaults to --level.
    #[arg(long)]
    pub finest_level: Option<u32>,
    #[arg(long = "tableau-file")]
    pub tableau_file: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InvariantArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated method names.
    #[arg(long)]
    pub method: String,
    /// Step size.
    #[arg(long)]
    pub h: f64,
    /// Integration horizon; must be a multiple of --h.
    #[arg(long)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "tableau-file")]
    pub tableau_file: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Output of a successful or numerically failed command.
struct Outcome {
    document: Vec<u8>,
    notes: Vec<String>,
    numerical_failure: bool,
}

impl Outcome {
    fn ok(document: Vec<u8>) -> Self {
        Self {
            document,
            notes: Vec::new(),
            numerical_failure: false,
        }
    }
}

fn load_extra(files: &[PathBuf]) -> Result<Vec<ButcherTableau>> {
    files
        .iter()
        .map(|f| load_tableau(&std::fs::read_to_string(f)?))
        .collect()
}

fn resolve_methods(list: &str, files: &[PathBuf]) -> Result<Vec<ButcherTableau>> {
    let extra = load_extra(files)?;
    let names: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if names.is_empty() {
        return Err(Error::InvalidConfig("--method is empty".into()));
    }
    names
        .iter()
        .map(|name| match extra.iter().find(|t| t.name() == *name) {
            Some(t) => Ok(t.clone()),
            None => builtin(name).map_err(|e| match e {
                Error::UnknownMethod { name, mut available } => {
                    for t in &extra {
                        available.push_str(", ");
                        available.push_str(t.name());
                    }
                    Error::UnknownMethod { name, available }
                }
                other => other,
            }),
        })
        .collect()
}

/// Parses `4-9`, `4..9` or `4,5,7`.
pub fn parse_levels(text: &str) -> Result<Vec<u32>> {
    let bad = || Error::InvalidConfig(format!("cannot parse levels `{text}`"));
    let t = text.trim();
    let range = t.split_once("..").or_else(|| t.split_once('-'));
    let levels: Vec<u32> = match range {
        Some((lo, hi)) => {
            let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
            let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            (lo..=hi).collect()
        }
        None => t
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?,
    };
    if levels.is_empty() {
        return Err(bad());
    }
    Ok(levels)
}

fn study_config(args: &StudyArgs) -> Result<StudyConfig> {
    let problem = args.problem.build()?;
    let methods = resolve_methods(&args.method, &args.tableau_file)?;
    let mut cfg = StudyConfig::new(problem, methods);
    cfg.n_paths = args.paths;
    cfg.master_seed = args.seed;
    cfg.finest_level = args.finest_level;
    cfg.levels = parse_levels(&args.levels)?;
    cfg.error_floor = args.error_floor;
    cfg.workers = args.workers;
    cfg.validate()?;
    Ok(cfg)
}

fn report_outcome(report: &ConvergenceReport, format: Format) -> Result<Outcome> {
    let document = match format {
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            buf
        }
        Format::Json => (report.to_json()? + "\n").into_bytes(),
    };
    let notes = report
        .methods
        .iter()
        .map(|m| {
            let fitted = m
                .fitted_order
                .slope()
                .map_or_else(|| "not enough data".to_string(), |s| format!("{s:.3}"));
            format!(
                "{}: fitted order {} (predicted {}, p_d={})",
                m.method, fitted, m.predicted_order, m.deterministic_order
            )
        })
        .collect();
    Ok(Outcome {
        document,
        notes,
        numerical_failure: report.rows.iter().any(|r| !r.is_valid()),
    })
}

fn run_command(command: &Command) -> Result<(Outcome, Option<PathBuf>)> {
    match command {
        Command::ListMethods(args) => {
            let mut methods = all_builtins();
            methods.extend(load_extra(&args.tableau_file)?);
            let mut out = String::from("method,s,explicit,p_d,sde_order\n");
            for t in &methods {
                let pd = deterministic_order(t, 8)?.order;
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    t.name(),
                    t.stages(),
                    t.is_explicit(),
                    pd,
                    predicted_sde_order(pd)
                ));
            }
            Ok((Outcome::ok(out.into_bytes()), None))
        }
        Command::Order(args) => {
            let methods = resolve_methods(&args.method, &args.tableau_file)?;
            let mut text = String::new();
            let mut docs = Vec::new();
            for t in &methods {
                let report = deterministic_order(t, args.max_check)?;
                let sde = predicted_sde_order(report.order);
                if methods.len() > 1 {
                    text.push_str(&format!("{}\n", t.name()));
                }
                text.push_str(&format!("p_d={}, sde order={}\n", report.order, sde));
                match &report.first_failure {
                    Some(f) => text.push_str(&format!(
                        "first failing tree: {} (order {}, weight {:e}, 1/gamma {:e}, |diff| {:e} > {:e})\n",
                        f.tree,
                        f.tree.order(),
                        f.weight,
                        f.expected,
                        f.residual(),
                        ORDER_CONDITION_TOL
                    )),
                    None => text.push_str(&format!("all conditions hold up to order {}\n", args.max_check)),
                }
                docs.push(json!({
                    "method": t.name(),
                    "p_d": report.order,
                    "sde_order": sde,
                    "max_check": args.max_check,
                    "first_failing_tree": report.first_failure.as_ref().map(|f| json!({
                        "tree": f.tree.to_string(),
                        "order": f.tree.order(),
                        "weight": f.weight,
                        "expected": f.expected,
                    })),
                }));
            }
            let doc = match args.format {
                Format::Csv => text.into_bytes(),
                Format::Json => (serde_json::to_string_pretty(&docs)? + "\n").into_bytes(),
            };
            Ok((Outcome::ok(doc), None))
        }
        Command::Converge(args) => {
            let cfg = study_config(args)?;
            let report = mean_square_study(&cfg)?;
            Ok((report_outcome(&report, args.format)?, args.out.clone()))
        }
        Command::ConvergeWeak(args) => {
            let mut cfg = study_config(&args.study)?;
            cfg.weak_order = WeakOrder::try_from(args.weak_order)?;
            cfg.weak_functional = Some(match args.functional {
                FunctionalArg::X1 => WeakFunctional::first_component(),
                FunctionalArg::Norm2 => WeakFunctional::squared_norm(),
            });
            cfg.weak_reference = args.reference;
            cfg.weak_estimator = match args.estimator {
                EstimatorArg::Plain => WeakEstimator::Plain,
                EstimatorArg::Surrogate => WeakEstimator::ExactSurrogate,
                EstimatorArg::Auto if cfg.problem.has_exact() => WeakEstimator::ExactSurrogate,
                EstimatorArg::Auto => WeakEstimator::Plain,
            };
            let report = weak_study(&cfg)?;
            Ok((report_outcome(&report, args.study.format)?, args.study.out.clone()))
        }
        Command::Trajectory(args) => {
            let problem = args.problem.build()?;
            let methods = resolve_methods(&args.method, &args.tableau_file)?;
            if methods.len() != 1 {
                return Err(Error::InvalidConfig("trajectory takes exactly one --method".into()));
            }
            let finest = args.finest_level.unwrap_or(args.level);
            if args.level > finest {
                return Err(Error::InvalidConfig("--level must not exceed --finest-level".into()));
            }
            let path = generate_path(*problem.spec(), finest, args.seed)?;
            let traj = integrate(&problem, &methods[0], &path, args.level, &StageSolveConfig::default())?
                .into_result()?;
            let doc = match args.format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    traj.write_csv(&mut buf)?;
                    buf
                }
                Format::Json => {
                    let value = json!({
                        "problem": problem.name(),
                        "params": problem.params(),
                        "method": methods[0].name(),
                        "seed": args.seed,
                        "level": args.level,
                        "finest_level": finest,
                        "times": traj.times,
                        "states": traj.states,
                        "dmu": traj.dmu,
                        "wiener_total": path.wiener_total(),
                        "exact_final": problem.exact(problem.spec().t1, path.wiener_total()),
                    });
                    (serde_json::to_string_pretty(&value)? + "\n").into_bytes()
                }
            };
            Ok((Outcome::ok(doc), args.out.clone()))
        }
        Command::Invariants(args) => {
            let problem = args.problem.build()?;
            let methods = resolve_methods(&args.method, &args.tableau_file)?;
            let series =
                invariant_drift_study(&problem, &methods, args.h, args.horizon, args.seed, &StageSolveConfig::default())?;
            let doc = match args.format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_drift_csv(&series, &mut buf)?;
                    buf
                }
                Format::Json => (serde_json::to_string_pretty(&series)? + "\n").into_bytes(),
            };
            let mut notes = Vec::new();
            for s in &series {
                for (k, name) in s.invariants.iter().enumerate() {
                    notes.push(format!("{}: max |{} drift| = {:e}", s.method, name, s.max_abs_drift(k)));
                }
                if let Some((step, msg)) = &s.failure {
                    notes.push(format!("{}: stopped at step {step}: {msg}", s.method));
                }
            }
            Ok((
                Outcome {
                    document: doc,
                    notes,
                    numerical_failure: false,
                },
                args.out.clone(),
            ))
        }
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::StepFailed { .. } => 2,
        _ => 1,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    let (outcome, out_path) = match run_command(&cli.command) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code_for(&e);
        }
    };
    let written = match &out_path {
        Some(path) => std::fs::write(path, &outcome.document),
        None => stdout.write_all(&outcome.document),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return 1;
    }
    for note in &outcome.notes {
        let _ = writeln!(stderr, "{note}");
    }
    if outcome.numerical_failure {
        let _ = writeln!(stderr, "error: at least one study row has no successful samples");
        2
    } else {
        0
    }
}

/// Entry point for the `strat-rk` binary.
pub fn main() -> ! {
    let code = run(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code)
}
