use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "dopewall", version, about = "Discrete orthogonal polynomial ensembles with a wall")]
#[command(disable_help_flag = true, disable_version_flag = true)]
pub struct Cli {
    /// Worker threads for batches of seeds or N values.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Where to write the run manifest (default: next to the first output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[arg(long, action = ArgAction::Help, global = true)]
    pub help: Option<bool>,
    #[arg(long, action = ArgAction::Version)]
    pub version: Option<bool>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Build a correlation kernel and export it as CSV with a JSON sidecar.
    Kernel(KernelArgs),
    /// Draw exact samples of the point process.
    Sample(SampleArgs),
    /// Enumerate the law of a tiny ensemble.
    Oracle(OracleArgs),
    /// Solve the constrained equilibrium problem.
    Equilibrium(EquilibriumArgs),
    /// Limit kernels, Tracy–Widom and wall laws, convergence suites.
    #[command(subcommand)]
    Limits(LimitsCommand),
    /// Half-hexagon tilings.
    #[command(subcommand)]
    Halfhex(HalfhexCommand),
    /// Run acceptance suites.
    Verify(VerifyArgs),
    /// Re-run a manifest and compare output hashes.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Uniform,
    Hahn,
    Ahe,
    Halfhex,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Standard,
    Wall,
}

/// In wall mode the node set has 2N points and k counts particles on the
/// positive half. Hahn-type parameters default to P = Q = A·|X| + 1.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EnsembleArgs {
    #[arg(long, value_enum, default_value = "hahn")]
    pub family: Family,
    #[arg(long, value_enum, default_value = "standard")]
    pub mode: ModeArg,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long = "A")]
    pub a: Option<f64>,
    #[arg(long = "R")]
    pub r: Option<usize>,
    /// Column of the half-hexagon (even).
    #[arg(long)]
    pub m: Option<usize>,
    /// node,log_weight table for `--family table`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct KernelArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long)]
    pub output: PathBuf,
    /// Node indices `i,j,..` or a range `a..b` for a count distribution.
    #[arg(long)]
    pub window: Option<String>,
    /// Where to write the count distribution of `--window`.
    #[arg(long)]
    pub counts_output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OracleArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EquilibriumArgs {
    #[arg(long, value_enum, default_value = "hahn")]
    pub family: Family,
    /// Number of nodes used to extract the potential.
    #[arg(long = "N", default_value_t = 400)]
    pub n: usize,
    #[arg(long = "A")]
    pub a: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub c: f64,
    #[arg(long, default_value_t = 512)]
    pub gridsize: usize,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iterations: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitsCommand {
    /// Tracy–Widom CDF at one point or on a sweep.
    Tw(TwArgs),
    /// Survival function of the particle nearest the wall.
    Wall(WallArgs),
    /// A limit kernel at one pair of points.
    Kernel(LimitKernelArgs),
    /// Rescaled-kernel convergence rates for the Hahn family.
    Suite(SuiteArgs),
}

/// Either a single `--s` or a sweep `--from --to --step`.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Points {
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TwArgs {
    #[command(flatten)]
    pub points: Points,
    #[arg(long, default_value_t = 40)]
    pub order: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct WallArgs {
    #[command(flatten)]
    pub points: Points,
    #[arg(long)]
    pub delta0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho0: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKernelArg {
    Sine,
    SineWall,
    Airy,
    DiscreteWall,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LimitKernelArgs {
    #[arg(long, value_enum)]
    pub kernel: LimitKernelArg,
    #[arg(long, allow_hyphen_values = true)]
    pub xi: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub eta: f64,
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub rho0: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SuiteArgs {
    /// band, wall, gap_void, gap_saturated, edge or cross_term.
    #[arg(long)]
    pub regime: String,
    #[arg(long = "A", default_value_t = 1.0)]
    pub a: f64,
    #[arg(long)]
    pub c: f64,
    #[arg(long = "N-list", value_delimiter = ',', default_value = "50,100,200,400")]
    pub n_list: Vec<usize>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfhexCommand {
    /// Run the tiling chain and render the result.
    Tile(TileArgs),
    /// Exact samples of the crossings of one column.
    Line(LineArgs),
    /// One-point profile of a column against its limit.
    Profile(ProfileArgs),
    /// Render a saved tiling state.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TileArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long = "R")]
    pub r: usize,
    /// Sweeps of the chain; defaults to the built-in burn-in.
    #[arg(long)]
    pub sweeps: Option<u64>,
    /// Required unless `--sweeps 0`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "tiling.svg")]
    pub output: PathBuf,
    /// Also save the tiling as JSON.
    #[arg(long)]
    pub state: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LineArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long = "R")]
    pub r: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ProfileArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long = "R")]
    pub r: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    /// Full profile with crossings and edge statistics as JSON.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RenderArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    /// oracle, kernels, equilibrium, limits, halfhex, arctic or all.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Also write the report as JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long = "from")]
    pub manifest: PathBuf,
}
