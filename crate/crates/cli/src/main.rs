//! `torusdiff`: simulate, evaluate, fit and test circular and toroidal
//! diffusions from the command line.
//!
//! Exit status: 0 on success, 1 for usage or input errors, 2 for numerical
//! or convergence failures, 3 when ingestion rejected some tracks.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "torusdiff", version, about = "Exact circular and toroidal diffusions")]
pub struct Cli {
    /// seed of every random draw
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// output file (stdout when omitted)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// output format (paths default to csv, reports to json)
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// density as a JSON file or inline JSON text
    #[arg(long, global = true)]
    pub density: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Direct,
    Subordinated,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a diffusion path exactly (or by Euler-Maruyama)
    Simulate(SimulateArgs),
    /// Evaluate the transition density
    Tpd(TpdArgs),
    /// Maximum likelihood fit of path files
    Fit(FitArgs),
    /// One-sample likelihood-ratio test
    Test(TestArgs),
    /// k-group linear-hypothesis likelihood-ratio test
    Ktest(KtestArgs),
    /// Sample exact diffusion bridges
    Bridge(BridgeArgs),
    /// Simulate the circular jump process or its bridges
    Jump(JumpArgs),
    /// Convert (t, x, y) tracks into angular paths
    Ingest(IngestArgs),
    /// Run a Monte Carlo experiment from a JSON config
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
pub struct Volatility {
    /// volatility (isotropic for toroidal densities)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// full covariance, row-major and comma-separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub cov: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub vol: Volatility,
    /// initial angles, comma-separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta0: Option<Vec<f64>>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub delta: f64,
    /// integrate the SDE with this many Euler-Maruyama substeps per step
    #[arg(long)]
    pub euler_substeps: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TpdArgs {
    #[command(flatten)]
    pub vol: Volatility,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub from: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub to: Vec<f64>,
    #[arg(long)]
    pub t: f64,
    /// use the jump process kernel
    #[arg(long)]
    pub jump: bool,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    /// family: uniform, von_mises, wrapped_cauchy or von_mises_mixture:<k>
    #[arg(long, default_value = "von_mises")]
    pub family: String,
    /// fit the jump process instead of the diffusion
    #[arg(long)]
    pub jump: bool,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// path CSV files treated as independent replicates
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// null values, e.g. `mu=0,kappa=1`
    #[arg(long)]
    pub null: String,
}

#[derive(Args, Debug)]
pub struct KtestArgs {
    /// JSON manifest: {"groups":[{"label":"a","paths":["x.csv",...]},...]}
    #[arg(long, required_unless_present = "split")]
    pub groups: Option<PathBuf>,
    /// change-point test at this time, using the positional paths
    #[arg(long, requires = "paths", conflicts_with_all = ["groups", "preset", "matrix"])]
    pub split: Option<f64>,
    pub paths: Vec<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// homogeneity preset
    #[arg(long, conflicts_with = "matrix")]
    pub preset: Option<String>,
    /// CSV file holding the restriction matrix M
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BridgeArgs {
    #[command(flatten)]
    pub vol: Volatility,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub from: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub to: Vec<f64>,
    #[arg(long)]
    pub horizon: f64,
    /// number of equispaced interior points
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub draws: usize,
}

#[derive(Args, Debug)]
pub struct JumpArgs {
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub theta0: f64,
    #[arg(long, value_enum, default_value_t = Mode::Direct)]
    pub mode: Mode,
    /// number of steps (simulation) or interior points (bridge)
    #[arg(long)]
    pub n: usize,
    /// step length (simulation)
    #[arg(long)]
    pub delta: Option<f64>,
    /// bridge endpoint; switches to bridge sampling
    #[arg(long, allow_hyphen_values = true)]
    pub end: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub draws: usize,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// CSV with columns t, x, y and optionally id
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub max_missing: f64,
    #[arg(long, default_value_t = 0.5)]
    pub immobile_floor: f64,
    /// directory receiving one path CSV per accepted track
    #[arg(long)]
    pub paths_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    /// JSON experiment config
    pub config: PathBuf,
    /// write per-replicate samples (z-scores or statistics) here
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.error);
            ExitCode::from(e.code)
        }
    }
}
