use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Hypergeometric inverted-beta shrinkage and two-groups screening.
///
/// Every subcommand is deterministic given its input bytes, flags and seed,
/// whatever the worker count. Exit codes: 0 success, 2 input or validation
/// error, 3 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "hibscreen", version, propagate_version = true)]
pub struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    /// Flat `key = value` file supplying defaults for the subcommand's long
    /// flags (`#` starts a comment); flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate a prior or posterior quantity over a grid (plot data).
    Eval(EvalArgs),
    /// Run the sparse normal-means simulation for one signal configuration.
    Simulate(SimulateArgs),
    /// Screen a cohort of firm trajectories.
    Screen(ScreenArgs),
    /// Shrink a whole vector by the common factor g(‖y‖²).
    Shrink(ShrinkArgs),
    /// Write a synthetic cohort of firm trajectories as CSV.
    Cohort(CohortArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    pub fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Output format: CSV with 10 significant digits or JSON with 17.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct HibArgs {
    /// Shape a (behaviour of the prior near κ = 0, i.e. its tails).
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub a: f64,
    /// Shape b (behaviour near κ = 1, i.e. near the origin).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub b: f64,
    /// Global scale τ; τ² must lie in [1e-3, 1e3].
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub tau: f64,
    /// Exponential tilt s.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub s: f64,
    /// Noise standard deviation σ.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    /// Prior density of κ.
    KappaDensity,
    /// Prior density of λ².
    Lambda2Density,
    /// Prior moments E(κⁿ), n = 1..=max-moment.
    Moments,
    /// Prior moment-generating function E(e^{tκ}).
    Mgf,
    /// Posterior mean E(β | y) under the alternative.
    PosteriorMean,
    /// Posterior variance Var(β | y) under the alternative.
    PosteriorVar,
    /// Score d/dy ln m₁(y).
    Score,
    /// Marginal density m₁(y).
    Marginal,
    /// P(β > 0 | y) under the alternative.
    ProbPositive,
    /// Prior density of κ on an even grid of interior points.
    ShrinkageProfile,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub quantity: Quantity,

    #[command(flatten)]
    pub hib: HibArgs,

    /// Grid `start:end:step` over κ, λ², t or y as the quantity requires.
    #[arg(long, visible_aliases = ["y-grid", "x-grid", "t-grid"], value_name = "START:END:STEP", allow_hyphen_values = true)]
    pub grid: Option<String>,

    /// Highest moment for `--quantity moments`.
    #[arg(long, default_value_t = 4)]
    pub max_moment: u32,

    /// Number of points for `--quantity shrinkage-profile`.
    #[arg(long, default_value_t = 99)]
    pub points: usize,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Importance-sampling draws of (w, τ).
    #[arg(long, default_value_t = 5000)]
    pub n_draws: usize,
    /// Distinct τ values among the draws.
    #[arg(long, default_value_t = 50)]
    pub tau_draws: usize,
    /// Minimum effective sample size before the fit is rejected.
    #[arg(long, default_value_t = 50.0)]
    pub min_ess: f64,
    /// Lower bound of the τ² prior support.
    #[arg(long, default_value_t = 1e-3)]
    pub tau2_min: f64,
    /// Upper bound of the τ² prior support.
    #[arg(long, default_value_t = 1e3)]
    pub tau2_max: f64,
    /// Scale of the half-Cauchy prior on τ.
    #[arg(long, default_value_t = 1.0)]
    pub tau_scale: f64,
    /// Importance proposal: the priors, or a defensive pilot-fitted mixture.
    #[arg(long, value_enum, default_value_t = ProposalArg::Adaptive)]
    pub proposal: ProposalArg,
    /// Fixed tilt s of the alternative.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProposalArg {
    Prior,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignalKind {
    /// k means equal to --value.
    Fixed,
    /// k means drawn as --scale · t_df.
    Random,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Master seed; replicate streams derive from it.
    #[arg(long, env = "HIBSCREEN_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Dimension of the mean vector.
    #[arg(long, default_value_t = 1000)]
    pub p: usize,
    #[arg(long, value_enum, default_value_t = SignalKind::Fixed)]
    pub signal: SignalKind,
    /// Number of nonzero means.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Value of every nonzero mean (fixed signals).
    #[arg(long, default_value_t = 7.0)]
    pub value: f64,
    /// Scale c of the nonzero means (random signals).
    #[arg(long, default_value_t = 0.5)]
    pub scale: f64,
    /// Degrees of freedom of the t draws (random signals).
    #[arg(long, default_value_t = 3.0)]
    pub df: f64,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    /// HIB estimators as comma-separated `a:b` pairs; empty for none.
    #[arg(long, default_value = "0.5:1")]
    pub hib: String,
    /// Include the Laplace-mixture posterior-median baseline.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub laplace: Switch,
    /// Rate of the baseline's Laplace prior.
    #[arg(long, default_value_t = 0.5)]
    pub laplace_rate: f64,
    /// HIB flags observations whose inclusion probability exceeds this.
    #[arg(long, default_value_t = 0.5)]
    pub flag_threshold: f64,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    /// CSV with header `firm_id,year,z` or
    /// `firm_id,year,raw_value,benchmark_mean,benchmark_sd`.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Seed of the hyperparameter fit.
    #[arg(long, env = "HIBSCREEN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Firms with fewer yearly records are dropped.
    #[arg(long, default_value_t = 5)]
    pub min_years: usize,
    /// Deflate each firm's statistic for lag-1 autocorrelation.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub ess_correction: Switch,
    /// Inclusion probability above which a firm is flagged high.
    #[arg(long, default_value_t = 0.9)]
    pub high_threshold: f64,
    /// Inclusion probability above which a firm is flagged mid.
    #[arg(long, default_value_t = 0.5)]
    pub mid_threshold: f64,
    /// Shape a of the alternative.
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    /// Shape b of the alternative.
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ShrinkArgs {
    /// File of y values separated by whitespace, commas or newlines.
    #[arg(long, value_name = "PATH", conflicts_with = "y", required_unless_present = "y")]
    pub input: Option<PathBuf>,
    /// Comma-separated y values.
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<String>,
    #[command(flatten)]
    pub hib: HibArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CohortArgs {
    #[arg(long, env = "HIBSCREEN_SEED", default_value_t = 2024)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub n_null: usize,
    #[arg(long, default_value_t = 30)]
    pub n_signal: usize,
    /// Mean yearly z-score of signal firms.
    #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 10)]
    pub years: usize,
    /// AR(1) coefficient of the yearly noise.
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,
    #[arg(long, default_value_t = 2000, allow_negative_numbers = true)]
    pub first_year: i64,
    /// Output file; stdout when omitted.
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}
