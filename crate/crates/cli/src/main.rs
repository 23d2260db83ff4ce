use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};

mod analyze;
mod files;
mod scale;
mod stats;
mod validate;

/// Parse, analyze, scale and compare Tor network consensus documents.
#[derive(Debug, Parser)]
#[command(name = "torsynth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Horizontal and vertical growth over an archive of consensuses, as TSV.
    Analyze(AnalyzeArgs),
    /// Scale a consensus through one or more vertical/horizontal stages.
    Scale(Box<ScaleArgs>),
    /// Compare a scaled consensus against a reference consensus.
    Validate(ValidateArgs),
    /// Summary statistics of a consensus.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Growth span ΔT in days.
    #[arg(long = "delta-t", value_name = "DAYS", default_value_t = 365.0)]
    pub delta_t: f64,
    /// Moving-average window in days.
    #[arg(long, value_name = "DAYS", default_value_t = 90.0)]
    pub window: f64,
    /// Maximum distance between a window endpoint and the sample used for it.
    #[arg(long, value_name = "HOURS", default_value_t = 36.0)]
    pub snap: f64,
    /// Consensus files or directories containing them.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
}

/// Three comma-separated factors: middle, guard, exit.
#[derive(Clone, Copy, Debug)]
pub struct Triple(pub f64, pub f64, pub f64);

fn parse_triple(s: &str) -> Result<Triple, String> {
    match parse_list(s)?.as_slice() {
        [m, g, e] => Ok(Triple(*m, *g, *e)),
        other => Err(format!("expected 3 comma-separated factors, got {}", other.len())),
    }
}

#[derive(Clone, Debug)]
pub struct FactorList(pub Vec<f64>);

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| format!("not a number: {p:?}"))).collect()
}

fn parse_factor_list(s: &str) -> Result<FactorList, String> {
    parse_list(s).map(FactorList)
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    /// Uniform vertical stage: multiply every weight by F.
    #[arg(long, value_name = "F")]
    pub vertical: Vec<f64>,
    /// Role-based vertical stage.
    #[arg(long = "vertical-roles", value_name = "M,G,E", value_parser = parse_triple)]
    pub vertical_roles: Vec<Triple>,
    /// Rank-based vertical stage: one factor per equal-size weight bucket.
    #[arg(long = "vertical-quantiles", value_name = "F1,F2,...", value_parser = parse_factor_list)]
    pub vertical_quantiles: Vec<FactorList>,
    /// Horizontal stage: grow the relay count by F (> 1).
    #[arg(long, value_name = "F")]
    pub horizontal: Vec<f64>,
    /// Probability that a family-bound new relay founds a new family.
    #[arg(long = "p-new", value_name = "P", default_value_t = 0.5)]
    pub p_new: f64,
    /// Role sampling weights for horizontal stages.
    #[arg(long = "horizontal-roles", value_name = "M,G,E", value_parser = parse_triple)]
    pub horizontal_roles: Option<Triple>,
    /// Seed for horizontal stages; required when one is present.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Input consensus.
    #[arg(long = "in", value_name = "PATH", conflicts_with = "input_pos")]
    pub input: Option<PathBuf>,
    #[arg(value_name = "INPUT", hide = true)]
    pub input_pos: Option<PathBuf>,
    /// Output consensus; standard output if omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Family declarations of the input relays.
    #[arg(long, value_name = "PATH")]
    pub families: Option<PathBuf>,
    /// Where to write the family partition of the output.
    #[arg(long = "families-out", value_name = "PATH")]
    pub families_out: Option<PathBuf>,
    /// IPv4 prefix to AS table.
    #[arg(long = "asn-db", value_name = "PATH")]
    pub asn_db: Option<PathBuf>,
    /// Run manifest path; defaults to `<out>.manifest.json` when --out is set.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub scaled: PathBuf,
    pub reference: PathBuf,
    /// Write both weight CDFs as TSV.
    #[arg(long = "cdf-out", value_name = "PATH")]
    pub cdf_out: Option<PathBuf>,
    /// Drop CDF points above this cumulative share (e.g. 0.99).
    #[arg(long = "cdf-clip", value_name = "Q")]
    pub cdf_clip: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub path: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub families: Option<PathBuf>,
    #[arg(long = "asn-db", value_name = "PATH")]
    pub asn_db: Option<PathBuf>,
}

fn run(cli: Cli, matches: &ArgMatches) -> anyhow::Result<()> {
    match cli.command {
        Command::Analyze(args) => analyze::run(&args),
        Command::Scale(args) => {
            let sub = matches.subcommand_matches("scale").expect("scale subcommand");
            scale::run(&args, sub)
        }
        Command::Validate(args) => validate::run(&args),
        Command::Stats(args) => stats::run(&args),
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli, &matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("torsynth: {e:#}");
            ExitCode::FAILURE
        }
    }
}
