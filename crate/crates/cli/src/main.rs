//! `expendist` command-line tool.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use expendist::{ErrorKind, Family, Statistic, TimeEncoding, Unit, DEFAULT_REPLICATES, DEFAULT_SEED};

#[derive(Parser, Debug)]
#[command(
    name = "expendist",
    version,
    about = "Fit and summarize grouped expenditure distributions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimum-chi-square fit of a parametric family to a grouped table.
    Fit(FitArgs),
    /// Goodness of fit with a Monte-Carlo p-value.
    Gof(GofArgs),
    /// Lorenz curve and Gini coefficient of a grouped table or a value column.
    Gini(GiniArgs),
    /// Kernel density estimate of log expenditure.
    Kde(KdeArgs),
    /// Linear time trends of a series table.
    Trend(TrendArgs),
    /// Gini and top shares of large samples drawn from a mixture.
    Simulate(SimulateArgs),
    /// Agent simulation of the Cobb-Douglas consumption model.
    Agents(AgentArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[arg(long, default_value_t = DEFAULT_SEED, global = true)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct TableArgs {
    /// Grouped table CSV (`lower,upper,class_mean,freq_households,freq_persons`).
    input: PathBuf,
    #[arg(long, value_parser = parse_unit, default_value = "person")]
    unit: Unit,
    /// Round label used for deflator lookup; defaults to the part of the
    /// file name after the last underscore.
    #[arg(long)]
    round: Option<String>,
    /// Price index CSV (`round_label,index`) to express limits in constant rupees.
    #[arg(long)]
    deflators: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    table: TableArgs,
    #[arg(long, value_parser = parse_family, default_value = "mixture")]
    family: Family,
    #[arg(long, default_value_t = 20_000)]
    max_evals: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct GofArgs {
    #[command(flatten)]
    table: TableArgs,
    #[arg(long, value_parser = parse_family, default_value = "mixture")]
    family: Family,
    /// JSON distribution (`{"family": .., "params": {..}}`) to test instead of a fresh fit.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, value_parser = parse_statistic, default_value = "ks")]
    statistic: Statistic,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    /// Draws per replicate.
    #[arg(long, default_value_t = 1000)]
    mc_size: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct GiniArgs {
    /// Grouped table CSV, or a one-column CSV of raw values.
    input: PathBuf,
    #[arg(long, value_parser = parse_unit, default_value = "person")]
    unit: Unit,
    #[arg(long)]
    round: Option<String>,
    #[arg(long)]
    deflators: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct KdeArgs {
    #[command(flatten)]
    table: TableArgs,
    /// Log-scale bandwidth; the rule of thumb when omitted.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Restrict each kernel to its class limits.
    #[arg(long)]
    truncated: bool,
    #[arg(long, default_value_t = expendist::kde::DEFAULT_GRID_POINTS)]
    grid_points: usize,
    /// Report the density of expenditure levels instead of log expenditure.
    #[arg(long)]
    level: bool,
    /// Urban table to pool with the input (treated as rural) into a national curve.
    #[arg(long, requires = "weights")]
    urban: Option<PathBuf>,
    /// Census anchors CSV (`year,rural_count,urban_count`) for pooling.
    #[arg(long, requires = "urban")]
    weights: Option<PathBuf>,
    /// Survey year for the pooling weights; read from the round label when omitted.
    #[arg(long)]
    year: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct TrendArgs {
    /// Series CSV whose first column is `round_label`.
    input: PathBuf,
    /// Columns to regress; all value columns when omitted.
    #[arg(long = "column")]
    columns: Vec<String>,
    #[arg(long, value_parser = parse_encoding, default_value = "midpoint")]
    time_encoding: TimeEncoding,
    /// Also fit a centred quadratic in time.
    #[arg(long)]
    quadratic: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Median of the lognormal body.
    #[arg(long, default_value_t = 660.502)]
    x_m: f64,
    #[arg(long, default_value_t = 0.178)]
    sigma2: f64,
    #[arg(long, default_value_t = 1.5)]
    nu: f64,
    #[arg(long, default_value_t = 1000.276)]
    x0: f64,
    #[arg(long, default_value_t = 0.3538)]
    pi: f64,
    /// Replace x0 by the cutoff at which the exact top-10% share equals this value.
    #[arg(long)]
    calibrate_top10: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct AgentArgs {
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 100.0)]
    kappa: f64,
    /// Fixed number of goods per agent.
    #[arg(long, conflicts_with = "tau_mean")]
    tau: Option<u64>,
    /// Mean of the geometric number of goods (used when --tau is absent).
    #[arg(long, default_value_t = 10.0)]
    tau_mean: f64,
    #[arg(long, value_enum, default_value_t = RatioLaw::Uniform)]
    ratio: RatioLaw,
    /// Upper limit, point value or mean of the ratio law.
    #[arg(long, default_value_t = 0.1)]
    ratio_param: f64,
    /// Add the ratios on the log scale, `c = kappa * exp(sum)`.
    #[arg(long)]
    log_linear: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RatioLaw {
    Uniform,
    Point,
    Exponential,
}

fn parse_unit(s: &str) -> Result<Unit, String> {
    s.parse().map_err(|e: expendist::Error| e.to_string())
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: expendist::Error| e.to_string())
}

fn parse_statistic(s: &str) -> Result<Statistic, String> {
    s.parse().map_err(|e: expendist::Error| e.to_string())
}

fn parse_encoding(s: &str) -> Result<TimeEncoding, String> {
    s.parse().map_err(|e: expendist::Error| e.to_string())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Input => 1,
        ErrorKind::Numeric => 2,
        ErrorKind::Io => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage problems are input errors; --help and --version are not errors
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Gof(a) => commands::gof(a),
        Command::Gini(a) => commands::gini(a),
        Command::Kde(a) => commands::kde(a),
        Command::Trend(a) => commands::trend(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Agents(a) => commands::agents(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
