use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mosumci::Bandwidth;

#[derive(Debug, Parser)]
#[command(name = "mosumci", version, about = "MOSUM change-point detection with bootstrap confidence intervals")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect change points in a series.
    Detect(DetectArgs),
    /// Detect change points and build bootstrap confidence intervals.
    Ci(CiArgs),
    /// Run a coverage experiment described by a JSON config.
    Simulate(SimulateArgs),
    /// Sample the limit laws of the change-point estimators.
    Limits(LimitsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    /// Two-window variance estimate at the candidate.
    Local,
    /// Median of the local scale profile.
    GlobalMedian,
}

impl From<ScaleArg> for mosumci::ScaleEstimator {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Local => mosumci::ScaleEstimator::Local,
            ScaleArg::GlobalMedian => mosumci::ScaleEstimator::GlobalMedian,
        }
    }
}

/// `G` for a symmetric bandwidth or `GL:GR` for an asymmetric one.
pub fn parse_bandwidth(s: &str) -> Result<Bandwidth, String> {
    let side = |t: &str| {
        t.trim()
            .parse::<usize>()
            .ok()
            .filter(|&g| g > 0)
            .ok_or_else(|| format!("'{t}' is not a positive integer bandwidth"))
    };
    match s.split_once(':') {
        Some((l, r)) => Ok(Bandwidth::asymmetric(side(l)?, side(r)?)),
        None => Ok(Bandwidth::symmetric(side(s)?)),
    }
}

/// A probability strictly between 0 and 1.
pub fn parse_unit(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        Ok(v) => Err(format!("{v} is not in (0, 1)")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Clone, Args)]
pub struct DetectorArgs {
    /// Series file: one value per line, or `index,value` / `year,value` CSV.
    pub input: PathBuf,
    /// Bandwidth(s) `G` or `GL:GR`, comma separated; several run the multiscale
    /// procedure. Defaults to 10, 20, 40, ... up to n/4.
    #[arg(long, alias = "bandwidths", value_delimiter = ',', value_parser = parse_bandwidth)]
    pub bandwidth: Vec<Bandwidth>,
    /// Significance level of the detection threshold.
    #[arg(long, default_value_t = 0.1, value_parser = parse_unit)]
    pub alpha: f64,
    /// Radius factor of the local-maximum criterion.
    #[arg(long, default_value_t = 0.4, value_parser = parse_unit)]
    pub eta: f64,
    /// Noise scale used in the threshold.
    #[arg(long, value_enum, default_value_t = ScaleArg::Local)]
    pub scale: ScaleArg,
}

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// JSON output file (stdout if absent).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Number of bootstrap replicates.
    #[arg(long, default_value_t = 1000)]
    pub boot_reps: usize,
    /// Master seed; drawn from the system and recorded if absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Confidence levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.9", value_parser = parse_unit)]
    pub levels: Vec<f64>,
    /// Worker threads (all cores if absent); results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// JSON output file (stdout if absent).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Experiment config (JSON); `signal` is a built-in name or an inline spec.
    pub config: PathBuf,
    /// Overrides `bootstrap.master_seed`; drawn from the system if neither is set.
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV coverage table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON report (stdout if absent).
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Law {
    /// Argmax of two-sided Brownian motion with drift (local changes).
    Wiener,
    /// Argmax of a two-sided random walk with drift (fixed changes).
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ErrorsArg {
    Gaussian,
    /// Student t scaled to standard deviation `--sigma`.
    T,
}

#[derive(Debug, Clone, Args)]
pub struct LimitsArgs {
    #[arg(long, value_enum)]
    pub law: Law,
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Truncation of the index set (default 100 for wiener, a jump-dependent
    /// integer for fixed).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Grid step of the Wiener discretisation.
    #[arg(long, default_value_t = 0.05)]
    pub grid_step: f64,
    /// Jump size (fixed law).
    #[arg(long = "d")]
    pub jump: Option<f64>,
    /// Error standard deviation (fixed law).
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = ErrorsArg::Gaussian)]
    pub errors: ErrorsArg,
    /// Degrees of freedom for `--errors t`.
    #[arg(long, default_value_t = 5)]
    pub df: u32,
    /// CSV file of the draws.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// JSON quantile summary (stdout if absent).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}
