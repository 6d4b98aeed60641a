//! `dstein`: goodness-of-fit tests, estimators, Monte Carlo studies and
//! identity diagnostics from the command line. Every command writes CSV with
//! a header row and a trailing `# seed=<S> version=<V>` line.
//!
//! Exit codes: 0 on success, 2 for unusable data, 3 for invalid
//! configuration or arguments.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use discrete_stein::characterize::{
    backward_identity_residual, cdf_identity_residual, cf_identity_residual, pgf_identity_residual,
    pmf_identity_residual,
};
use discrete_stein::estimate::{
    estimate_exppoly_hd_with, estimate_exppoly_with, estimate_nb_with, moment_estimators_nb,
    nb_default_bounds, s_nb, EstimateResult, HdConstants,
};
use discrete_stein::gof::{run_tests, BootstrapConfig};
use discrete_stein::optimize::OptimizerConfig;
use discrete_stein::{DiscreteModel, Error, RandomStream, Sample};

pub mod study;

pub use study::{bias_scatter, power_table, Family, ScatterConfig, StudyConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Data(_) => 2,
            Self::Config(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    /// Parameter, parse and option problems are configuration errors; a
    /// sample the procedure cannot handle is a data error.
    fn from(e: Error) -> Self {
        match e {
            Error::DegenerateSample(_) => Self::Data(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

/// Trailing provenance line of every CSV.
pub fn footer(seed: u64) -> String {
    format!("# seed={seed} version={VERSION}\n")
}

#[derive(Debug, Parser)]
#[command(name = "dstein", version, about = "Stein characterizations of discrete laws: tests, estimators, studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bootstrap goodness-of-fit tests of poissonity for one sample.
    Gof(GofArgs),
    /// Monte Carlo rejection rates over a list of distributions.
    PowerTable(PowerArgs),
    /// Negative binomial parameters of one sample.
    EstimateNb(EstimateNbArgs),
    /// Exponential-polynomial parameters of one sample.
    EstimateExppoly(EstimateExpPolyArgs),
    /// Replicated estimates and their biases at a known truth.
    BiasScatter(BiasArgs),
    /// Residuals of the characterizing identities of a model.
    IdentityCheck(IdentityArgs),
}

#[derive(Debug, Args)]
pub struct OptimizerArgs {
    /// Iteration cap of the optimizer.
    #[arg(long, default_value_t = 1000)]
    pub maxit: usize,
    /// Projected-gradient tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub gtol: f64,
}

impl OptimizerArgs {
    fn config(&self) -> Result<OptimizerConfig, CliError> {
        let cfg = OptimizerConfig {
            max_iter: self.maxit,
            grad_tol: self.gtol,
            ..OptimizerConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct GofArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Statistics to compute, comma-separated.
    #[arg(long = "stat", alias = "stats", default_value = "tnpo")]
    pub stats: String,
    #[arg(long = "B", default_value_t = 500)]
    pub b: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// File of `key = value` lines; flags given here take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// One distribution, e.g. `pp:q=0.25,t1=1,t2=5`; may repeat.
    #[arg(long = "row")]
    pub row: Vec<String>,
    /// Named row set: `table` (all power-study rows) or `null` (Poisson rows).
    #[arg(long)]
    pub rows: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long = "B")]
    pub b: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub stats: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NbMethod {
    Mde,
    Moments,
}

#[derive(Debug, Args)]
pub struct EstimateNbArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub starts: usize,
    #[arg(long, value_enum, default_value_t = NbMethod::Mde)]
    pub method: NbMethod,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExpPolyMethod {
    Mde,
    Hd,
}

#[derive(Debug, Args)]
pub struct EstimateExpPolyArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Pinned coefficient such as `theta2=0`; may repeat.
    #[arg(long)]
    pub fix: Vec<String>,
    #[arg(long, value_enum, default_value_t = ExpPolyMethod::Mde)]
    pub method: ExpPolyMethod,
    #[arg(long, default_value_t = 1)]
    pub starts: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Negbin,
    Exppoly,
}

#[derive(Debug, Args)]
pub struct BiasArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// True parameters: `r,q` or `theta1,theta3` (with θ₂ = 0) or all `θ`.
    #[arg(long, allow_hyphen_values = true)]
    pub truth: String,
    #[arg(long)]
    pub fix: Vec<String>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub starts: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IdentityKind {
    Pmf,
    Cdf,
    Cf,
    Pgf,
    Backward,
    All,
}

#[derive(Debug, Args)]
pub struct IdentityArgs {
    /// Model such as `poisson:lambda=2` or `exppoly:theta=0.5,0,-0.2`.
    #[arg(long)]
    pub model: String,
    #[arg(long, value_enum, default_value_t = IdentityKind::All)]
    pub identity: IdentityKind,
    #[arg(long, default_value_t = 40)]
    pub kmax: i64,
    /// Points of the `t` grid on `[−π, π]` and of the `s` grid on `[0, 1)`.
    #[arg(long, default_value_t = 20)]
    pub grid: usize,
}

/// Parses `args` (program name first), runs the command and writes its CSV
/// to `out`. Returns the process exit code; diagnostics go to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(text) => match out.write_all(text.as_bytes()) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("dstein: cannot write output: {e}");
                2
            }
        },
        Err(e) => {
            eprintln!("dstein: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<String, CliError> {
    match command {
        Command::Gof(a) => with_workers(a.workers, || cmd_gof(a)),
        Command::PowerTable(a) => {
            let cfg = study_config(a)?;
            with_workers(cfg.workers, || power_table(&cfg))
        }
        Command::EstimateNb(a) => cmd_estimate_nb(a),
        Command::EstimateExppoly(a) => cmd_estimate_exppoly(a),
        Command::BiasScatter(a) => with_workers(a.workers, || cmd_bias_scatter(a)),
        Command::IdentityCheck(a) => cmd_identity_check(a),
    }
}

/// Runs `f` inside a dedicated thread pool; `0` keeps the default size.
fn with_workers<T: Send>(
    workers: usize,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    pool.install(f)
}

pub fn read_sample(path: &Path) -> Result<Sample, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    text.parse()
        .map_err(|e: Error| CliError::Data(format!("{}: {e}", path.display())))
}

fn cmd_gof(a: &GofArgs) -> Result<String, CliError> {
    let stats = study::parse_statistics(&a.stats)?;
    if stats.is_empty() {
        return Err(CliError::Config("no statistic given".into()));
    }
    let cfg = BootstrapConfig { b: a.b, alpha: a.alpha };
    cfg.order_index()?;
    let sample = read_sample(&a.data)?;
    let reports = run_tests(&sample, &stats, &cfg, &RandomStream::new(a.seed))?;
    let mut out = String::from("statistic,value,critical_value,reject\n");
    for (s, r) in stats.iter().zip(reports) {
        writeln!(out, "{s},{},{},{}", r.statistic, r.critical_value, r.reject).unwrap();
    }
    out.push_str(&footer(a.seed));
    Ok(out)
}

fn study_config(a: &PowerArgs) -> Result<StudyConfig, CliError> {
    let mut cfg = match &a.config {
        Some(path) => StudyConfig::from_file(path)?,
        None => StudyConfig::default(),
    };
    if let Some(name) = &a.rows {
        cfg.rows = study::named_rows(name)?;
    }
    if !a.row.is_empty() {
        cfg.rows = a
            .row
            .iter()
            .map(|s| s.parse().map_err(CliError::from))
            .collect::<Result<_, _>>()?;
    }
    if let Some(list) = &a.stats {
        cfg.statistics = study::parse_statistics(list)?;
    }
    cfg.n = a.n.unwrap_or(cfg.n);
    cfg.reps = a.reps.unwrap_or(cfg.reps);
    cfg.b = a.b.unwrap_or(cfg.b);
    cfg.alpha = a.alpha.unwrap_or(cfg.alpha);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.workers = a.workers.unwrap_or(cfg.workers);
    Ok(cfg)
}

fn estimate_csv(fit: &EstimateResult, seed: u64) -> String {
    let mut out = String::new();
    for i in 1..=fit.params.len() {
        write!(out, "param_{i},").unwrap();
    }
    out.push_str("objective,converged,in_bounds\n");
    for p in &fit.params {
        write!(out, "{p},").unwrap();
    }
    writeln!(out, "{},{},{}", fit.objective, fit.converged, fit.in_bounds).unwrap();
    out.push_str(&footer(seed));
    out
}

fn cmd_estimate_nb(a: &EstimateNbArgs) -> Result<String, CliError> {
    let opt = a.optimizer.config()?;
    let sample = read_sample(&a.data)?;
    match a.method {
        NbMethod::Mde => {
            let fit = estimate_nb_with(&sample, &nb_default_bounds(), a.starts, &opt, &RandomStream::new(a.seed))
                .map_err(data_error)?;
            Ok(estimate_csv(&fit, a.seed))
        }
        NbMethod::Moments => {
            let m = moment_estimators_nb(&sample)?;
            let in_space = m.r > 0.0 && m.r.is_finite() && m.q > 0.0 && m.q < 1.0;
            let objective = if in_space {
                s_nb(&sample, m.r, m.q).map_or("NA".to_string(), |v| v.to_string())
            } else {
                "NA".to_string()
            };
            let mut out = String::from("param_1,param_2,objective,converged,in_bounds,underdispersed\n");
            writeln!(out, "{},{},{objective},NA,{in_space},{}", m.r, m.q, m.underdispersed).unwrap();
            out.push_str(&footer(a.seed));
            Ok(out)
        }
    }
}

/// Sample-dependent failures inside an estimator are data errors.
fn data_error(e: Error) -> CliError {
    match e {
        Error::Config(_) | Error::Parse { .. } => CliError::Config(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

/// Parses `theta2=0` into `(2, 0.0)`.
pub fn parse_fix(text: &str) -> Result<(usize, f64), CliError> {
    let bad = || CliError::Config(format!("`{text}` is not of the form thetaI=VALUE"));
    let (key, value) = text.split_once('=').ok_or_else(bad)?;
    let index = key
        .trim()
        .strip_prefix("theta")
        .and_then(|i| i.parse::<usize>().ok())
        .ok_or_else(bad)?;
    let value = value.trim().parse().map_err(|_| bad())?;
    Ok((index, value))
}

fn parse_fixes(list: &[String]) -> Result<Vec<(usize, f64)>, CliError> {
    list.iter().map(|s| parse_fix(s)).collect()
}

fn cmd_estimate_exppoly(a: &EstimateExpPolyArgs) -> Result<String, CliError> {
    let opt = a.optimizer.config()?;
    let fixed = parse_fixes(&a.fix)?;
    let sample = read_sample(&a.data)?;
    let rng = RandomStream::new(a.seed);
    let fit = match a.method {
        ExpPolyMethod::Mde => estimate_exppoly_with(&sample, a.d, &fixed, a.starts, &opt, &rng),
        ExpPolyMethod::Hd => {
            estimate_exppoly_hd_with(&sample, a.d, &fixed, a.starts, &opt, &HdConstants::default(), &rng)
        }
    }
    .map_err(data_error)?;
    Ok(estimate_csv(&fit, a.seed))
}

fn cmd_bias_scatter(a: &BiasArgs) -> Result<String, CliError> {
    let truth = a
        .truth
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Config(format!("`{}` is not a list of numbers", a.truth)))?;
    bias_scatter(&ScatterConfig {
        family: match a.family {
            FamilyArg::Negbin => Family::NegBin,
            FamilyArg::Exppoly => Family::ExpPoly,
        },
        truth,
        fixed: parse_fixes(&a.fix)?,
        n: a.n,
        reps: a.reps,
        seed: a.seed,
        starts: a.starts,
        optimizer: a.optimizer.config()?,
    })
}

fn cmd_identity_check(a: &IdentityArgs) -> Result<String, CliError> {
    let model: DiscreteModel = a.model.parse()?;
    if a.grid < 2 {
        return Err(CliError::Config("the grid needs at least two points".into()));
    }
    let g = a.grid as f64;
    let t_grid: Vec<f64> = (0..a.grid)
        .map(|i| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / (g - 1.0))
        .collect();
    let s_grid: Vec<f64> = (0..a.grid).map(|i| i as f64 / g).collect();
    let kinds = match a.identity {
        IdentityKind::All => vec![
            IdentityKind::Pmf,
            IdentityKind::Cdf,
            IdentityKind::Cf,
            IdentityKind::Pgf,
            IdentityKind::Backward,
        ],
        k => vec![k],
    };
    let mut out = String::from("identity,points,sup_abs,l2\n");
    for kind in kinds {
        let (name, result) = match kind {
            IdentityKind::Pmf => ("pmf", pmf_identity_residual(&model, a.kmax).map(|r| (r.points.len(), r.sup_abs, r.l2))),
            IdentityKind::Cdf => ("cdf", cdf_identity_residual(&model, a.kmax).map(|r| (r.points.len(), r.sup_abs, r.l2))),
            IdentityKind::Cf => ("cf", cf_identity_residual(&model, &t_grid).map(|r| (r.points.len(), r.sup_abs, r.l2))),
            IdentityKind::Pgf => ("pgf", pgf_identity_residual(&model, &s_grid).map(|r| (r.points.len(), r.sup_abs, r.l2))),
            IdentityKind::Backward => (
                "backward",
                backward_identity_residual(&model).map(|r| (r.points.len(), r.sup_abs, r.l2)),
            ),
            IdentityKind::All => unreachable!("expanded above"),
        };
        match result {
            Ok((points, sup, l2)) => writeln!(out, "{name},{points},{sup:e},{l2:e}").unwrap(),
            // Identities outside a model's scope are skipped when all are requested.
            Err(Error::Unsupported(_)) if a.identity == IdentityKind::All => {}
            Err(e) => return Err(e.into()),
        }
    }
    out.push_str(&footer(0));
    Ok(out)
}
