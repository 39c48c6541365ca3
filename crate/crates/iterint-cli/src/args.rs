use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "iterint", version, about = "Fourier-series approximation of iterated stochastic integrals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recompute a reference table next to its printed values.
    Tables(TablesArgs),
    /// Build coefficient tensors and optionally store them in a database.
    Coeffs(CoeffsArgs),
    /// Mean-square error of a truncated approximation.
    Error(ErrorArgs),
    /// Minimal truncation meeting `error ≤ dt^gamma`.
    Minq(MinqArgs),
    /// Draw realizations of an approximation.
    Sample(SampleArgs),
    /// Compare a coupled Monte Carlo error estimate with its formula.
    VerifyMc(VerifyMcArgs),
    /// Series and piecewise-linear approximations of a double Stratonovich integral.
    WongZakai(WongZakaiArgs),
    /// Strong convergence study for an SDE scheme.
    Sde(SdeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisArg {
    Legendre,
    Trig,
    TrigTails,
}

impl BasisArg {
    pub fn kind(self) -> iterint::BasisKind {
        match self {
            BasisArg::Legendre => iterint::BasisKind::Legendre,
            BasisArg::Trig | BasisArg::TrigTails => iterint::BasisKind::Trigonometric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CalculusArg {
    Ito,
    Strat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Output {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to a file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TablesArgs {
    /// Table number, 1 to 7.
    pub which: u8,
    /// Fail with exit code 3 if any cell misses its tolerance.
    #[arg(long)]
    pub paper_check: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CoeffsArgs {
    #[arg(long, value_enum, default_value_t = BasisArg::Legendre)]
    pub basis: BasisArg,
    #[arg(long)]
    pub k: usize,
    /// Truncation per dimension; one value is used for all.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub q: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// Database file to write the tensor to.
    #[arg(long)]
    pub db: Option<PathBuf>,
    /// Read tensors from `--db` instead of building one.
    #[arg(long)]
    pub load: bool,
    /// Print every entry rather than a summary.
    #[arg(long)]
    pub entries: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ErrorArgs {
    #[arg(long, value_enum, default_value_t = BasisArg::Legendre)]
    pub basis: BasisArg,
    /// Multiplicity; indices default to `1,2,..,k`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Multi-index of the integral, e.g. `1,2,3`; `0` is the time channel.
    #[arg(long, value_delimiter = ',')]
    pub indices: Vec<usize>,
    #[arg(long, value_enum, default_value_t = CalculusArg::Ito)]
    pub calculus: CalculusArg,
    /// Truncation values to evaluate; trigonometric `q` keeps indices up to `2q`.
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
    pub q: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// Closed-form formula id instead of the exact expansion error.
    #[arg(long)]
    pub formula: Option<String>,
    /// Also report the upper bound `k!(I_k − ΣC²)`.
    #[arg(long)]
    pub bound: bool,
    /// Coefficient database to read tensors from.
    #[arg(long)]
    pub db: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MinqArgs {
    #[arg(long, value_enum, default_value_t = BasisArg::Legendre)]
    pub basis: BasisArg,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub gamma: i32,
    /// Step sizes; defaults to 2^-5..2^-12.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub dt: Vec<f64>,
    /// Closed-form formula id overriding `--basis`/`--k`.
    #[arg(long)]
    pub formula: Option<String>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long, value_enum, default_value_t = BasisArg::Legendre)]
    pub basis: BasisArg,
    #[arg(long)]
    pub k: usize,
    /// Defaults to `1,2,..,k`.
    #[arg(long, value_delimiter = ',')]
    pub indices: Vec<usize>,
    #[arg(long, value_enum, default_value_t = CalculusArg::Ito)]
    pub calculus: CalculusArg,
    #[arg(long)]
    pub q: usize,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyMcArgs {
    #[arg(long, value_enum, default_value_t = BasisArg::Legendre)]
    pub basis: BasisArg,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Defaults to `1,2,..,k`.
    #[arg(long, value_delimiter = ',')]
    pub indices: Vec<usize>,
    #[arg(long, value_enum, default_value_t = CalculusArg::Ito)]
    pub calculus: CalculusArg,
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
    pub q: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    #[arg(long, default_value_t = 10_000)]
    pub n_samples: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n_grid: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Width of the acceptance band in standard errors.
    #[arg(long, default_value_t = 3.0)]
    pub n_se: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WongZakaiArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub indices: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "8,64,512")]
    pub coarse: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,5,25")]
    pub q: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    #[arg(long, default_value_t = 2_000)]
    pub n_samples: usize,
    #[arg(long, default_value_t = 4_096)]
    pub n_grid: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemArg {
    Gbm,
    Ou,
    Linear2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Euler,
    Milstein,
    Taylor15,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceArg {
    Exact,
    Half,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SdeArgs {
    #[arg(long, value_enum, default_value_t = ProblemArg::Gbm)]
    pub problem: ProblemArg,
    #[arg(long, value_enum, default_value_t = SchemeArg::Milstein)]
    pub scheme: SchemeArg,
    #[arg(long, value_enum, default_value_t = BasisArg::Legendre)]
    pub basis: BasisArg,
    /// Fixed truncations `q11,q111` (or shared `q` for trig); minimal per step size when omitted.
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<usize>,
    /// Step counts over the horizon.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128,256")]
    pub steps: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1_000)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reference solution; `exact` needs a problem with a known solution.
    #[arg(long, value_enum)]
    pub reference: Option<ReferenceArg>,
    #[arg(long, default_value_t = 1)]
    pub fine_factor: usize,
    /// Also time the order-1.5 integral family in both bases at this step size.
    #[arg(long)]
    pub compare_cost: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}
