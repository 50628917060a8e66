use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nrdetect::validation::DEFAULT_SEED;

#[derive(Debug, Parser)]
#[command(
    name = "nrdetect",
    version,
    about = "Detection curves for noise-type and QTMS radars"
)]
pub struct Cli {
    /// TOML file with default flag values; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Density of the detector statistic on an x grid.
    Pdf(PdfArgs),
    /// ROC curves (exact, large-N approximation, simulated).
    Roc(RocArgs),
    /// Normalized detection probability as a function of kappa.
    SweepKappa(SweepArgs),
    /// Detection probability against range.
    Range(RangeArgs),
    /// Run the acceptance checks and report JSON.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignArg {
    Qtms,
    NoiseRadar,
}

impl From<SignArg> for nrdetect::Sign {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Qtms => nrdetect::Sign::Qtms,
            SignArg::NoiseRadar => nrdetect::Sign::NoiseRadar,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PdfArgs {
    #[arg(long)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.0)]
    pub kappa: f64,
    #[arg(long)]
    pub n: u32,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub x_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub x_max: f64,
    #[arg(long, default_value_t = 1001)]
    pub points: usize,
    /// Use the general covariance (channel powers and phase) for D_0.
    #[arg(long)]
    pub general: bool,
    #[arg(long, requires = "general")]
    pub sigma1: Option<f64>,
    #[arg(long, requires = "general")]
    pub sigma2: Option<f64>,
    #[arg(long, requires = "general", allow_hyphen_values = true)]
    pub phi: Option<f64>,
    #[arg(long, value_enum, default_value_t = SignArg::Qtms)]
    pub sign: SignArg,
    /// Add a histogram estimate from this many simulated batches.
    #[arg(long)]
    pub mc_trials: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output CSV; a `<stem>.manifest.json` is written next to it. Stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Exact,
    Approx,
    Empirical,
    All,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RocArgs {
    #[arg(long)]
    pub rho: f64,
    #[arg(long, num_args = 1.., default_values_t = [0.0])]
    pub kappa: Vec<f64>,
    #[arg(long)]
    pub n: u32,
    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1e-4)]
    pub pfa_min: f64,
    /// Largest p_fa on the grid; when absent the grid runs up to (not including) 1.
    #[arg(long)]
    pub pfa_max: Option<f64>,
    #[arg(long, default_value_t = 60)]
    pub pfa_points: usize,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SignArg::Qtms)]
    pub sign: SignArg,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub pfa: f64,
    #[arg(long, num_args = 1.., required = true)]
    pub n: Vec<u32>,
    #[arg(long, default_value_t = 0.01, allow_hyphen_values = true)]
    pub kappa_step: f64,
    /// Largest kappa on the grid; below 1 when absent.
    #[arg(long)]
    pub kappa_max: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorArg {
    /// kappa follows rho(R).
    Optimal,
    /// kappa = 0.
    D0,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RangeArgs {
    #[arg(long)]
    pub rho0: f64,
    /// Characteristic range, metres.
    #[arg(long)]
    pub rc: f64,
    #[arg(long)]
    pub r_max: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    #[arg(long)]
    pub n: u32,
    #[arg(long, default_value_t = 1e-2)]
    pub pfa: f64,
    #[arg(long, value_enum, default_value_t = DetectorArg::Optimal)]
    pub detector: DetectorArg,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    /// 1e4 trials per simulation and wider tolerances.
    #[arg(long)]
    pub quick: bool,
    /// Run only these checks (1-12).
    #[arg(long, num_args = 1..)]
    pub only: Vec<u8>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Compute the detector with the wrong sign convention (mutation test).
    #[arg(long, hide = true)]
    pub mutate_sign: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}
