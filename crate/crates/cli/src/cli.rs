use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "fisher-clt", version, about = "Fisher information convergence checks for standardized sums")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Info,
    Sweep,
    Poincare,
    Project,
    Debruijn,
    Verify,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fisher information, relative entropy and distances to the normal.
    Info(RunArgs),
    /// Bounds on J(U_n) and D(U_n) over the n set.
    Sweep(RunArgs),
    /// Poincaré and restricted Poincaré constants.
    Poincare(RunArgs),
    /// Projection inequalities and telescoping over the test-function bank.
    Project(RunArgs),
    /// Relative entropy along the Gaussian smoothing path.
    Debruijn(RunArgs),
    /// Every check: sweep, two-fold step, skewness floor, doubling, tails.
    Verify(RunArgs),
}

impl Command {
    pub fn split(self) -> (CommandKind, RunArgs) {
        match self {
            Command::Info(a) => (CommandKind::Info, a),
            Command::Sweep(a) => (CommandKind::Sweep, a),
            Command::Poincare(a) => (CommandKind::Poincare, a),
            Command::Project(a) => (CommandKind::Project, a),
            Command::Debruijn(a) => (CommandKind::Debruijn, a),
            Command::Verify(a) => (CommandKind::Verify, a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// normal, exponential, gamma, uniform, laplace, gaussian_mixture,
    /// two_bump, table, or discrete (smoothed by --tau).
    #[arg(long)]
    pub family: Option<String>,
    /// Family parameters as `k=v,...`; list values separated by `:`.
    #[arg(long)]
    pub params: Option<String>,
    #[arg(long)]
    pub shape: Option<f64>,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub mean: Option<f64>,
    #[arg(long)]
    pub var: Option<f64>,
    #[arg(long)]
    pub loc: Option<f64>,
    /// Shift and scale the law to mean 0, variance 1.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Grid domain as `lo,hi`, or a half-width `w` for `[−w, w]`.
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<String>,
    /// Comma-separated n values.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<u32>>,
    /// Comma-separated tail radii.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// Variance of the Gaussian smoothing of a discrete law.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Weight in the projection inequality; default checks 0, 0.5 and 1.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Tolerances as `name=value,...`.
    #[arg(long)]
    pub tol: Option<String>,
    /// Output directory; nothing is written without it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Seed of the spline test-function bank.
    #[arg(long)]
    pub seed: Option<u64>,
}
