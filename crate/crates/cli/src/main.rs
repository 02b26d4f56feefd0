use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod golden;
mod output;

use output::Artifact;

#[derive(Parser, Debug, Clone)]
#[command(name = "cylspace", version, about = "Angle / angular-momentum numerics on the cylinder phase space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Moments and uncertainty product of a von Mises state.
    Moments(MomentsArgs),
    /// Normalized joint-measurement curves over a range of signal spreads.
    BoundCurve(BoundCurveArgs),
    /// Matched ancilla spread for a signal spread, or the reverse.
    KappaMatch(KappaMatchArgs),
    /// Teleport a von Mises state over sampled measurement outcomes.
    Teleport(TeleportArgs),
    /// Characteristic functions and quasiprobabilities of a von Mises mixture.
    Phasespace(PhasespaceArgs),
    /// Run the invariant suite.
    Verify(CommonArgs),
    /// Write the regression goldens into a directory.
    GoldenGen(GoldenArgs),
    /// Regenerate the goldens and compare against a directory.
    GoldenCheck(GoldenCheckArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Output file; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Only the teleport outcome sampler reads the seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
#[command(allow_negative_numbers = true)]
pub struct MomentsArgs {
    #[arg(long, default_value_t = 0)]
    pub n: i64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long)]
    pub kappa: f64,
    /// Highest `⟨E^l⟩` reported.
    #[arg(long, default_value_t = 2)]
    pub l_top: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Args, Debug, Clone)]
#[command(allow_negative_numbers = true)]
pub struct BoundCurveArgs {
    #[arg(long, default_value_t = 0.05)]
    pub kappa_s_min: f64,
    #[arg(long, default_value_t = 6.0)]
    pub kappa_s_max: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long, value_enum, default_value = "linear")]
    pub spacing: Spacing,
    /// Fractional part of the ancilla angular momentum.
    #[arg(long, default_value_t = 0.0)]
    pub delta_a: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct KappaPick {
    #[arg(long)]
    pub kappa_a: Option<f64>,
    #[arg(long)]
    pub kappa_s: Option<f64>,
}

#[derive(Args, Debug, Clone)]
#[command(allow_negative_numbers = true)]
pub struct KappaMatchArgs {
    #[command(flatten)]
    pub pick: KappaPick,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone)]
#[command(allow_negative_numbers = true)]
pub struct TeleportArgs {
    #[arg(long, default_value_t = 0)]
    pub n: i64,
    #[arg(long, default_value_t = 0.0)]
    pub delta_in: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta_a: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta_b: f64,
    /// Resource truncation `|l| ≤ H`.
    #[arg(long, default_value_t = 40)]
    pub half_width: usize,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 256)]
    pub psi_grid: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    WignerChar,
    QChar,
    PChar,
    Q,
    Kernel,
    Overlap,
}

#[derive(Args, Debug, Clone)]
#[command(allow_negative_numbers = true)]
pub struct PhasespaceArgs {
    #[arg(long, value_enum)]
    pub kind: PhaseKind,
    /// Mixture component `weight:n:alpha`; repeatable.
    #[arg(long = "component", default_value = "1:0:0")]
    pub components: Vec<String>,
    /// Spread shared by the mixture and the probe.
    #[arg(long)]
    pub kappa: f64,
    /// Density matrix window `[-W, W]`.
    #[arg(long, default_value_t = 20)]
    pub window: usize,
    #[arg(long, default_value_t = 16)]
    pub l_max: i64,
    /// Points on the `φ` or `α` grid.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Half-width of the `n` (or `ν`) window for tables.
    #[arg(long, default_value_t = 30)]
    pub n_half_width: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone)]
pub struct GoldenArgs {
    #[arg(long)]
    pub dir: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct GoldenCheckArgs {
    #[arg(long)]
    pub dir: PathBuf,
    /// Scale every regenerated number by `1 + perturb` before comparing.
    #[arg(long, default_value_t = 0.0)]
    pub perturb: f64,
}

/// Failure classes and their exit statuses.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical contract violated: {m}"),
        }
    }
}

impl From<cylspace::Error> for CliError {
    fn from(e: cylspace::Error) -> Self {
        use cylspace::Error::*;
        match e {
            InvalidParameter(_) | Domain(_) | Mismatch(_) | EmptyMixture | Aliasing { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CYLSPACE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("CYLSPACE_THREADS must be a positive integer, got {raw:?}")))?;
    // a second initialisation in the same process is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::GoldenGen(a) => golden::generate(&a.dir),
        Command::GoldenCheck(a) => {
            let report = golden::check(&a.dir, a.perturb)?;
            if report.is_empty() {
                eprintln!("goldens match");
                Ok(())
            } else {
                for line in &report {
                    eprintln!("{line}");
                }
                Err(CliError::Numerical(format!("{} golden mismatches (at most 20 listed)", report.len())))
            }
        }
        Command::Verify(common) => {
            let (artifact, failed) = commands::verify();
            output::write(&artifact, &common)?;
            if failed > 0 {
                return Err(CliError::Numerical(format!("{failed} invariant checks failed")));
            }
            Ok(())
        }
        other => {
            let common = common_of(&other).clone();
            let artifact: Artifact = commands::dispatch(&other)?;
            output::write(&artifact, &common)
        }
    }
}

pub fn common_of(c: &Command) -> &CommonArgs {
    match c {
        Command::Moments(a) => &a.common,
        Command::BoundCurve(a) => &a.common,
        Command::KappaMatch(a) => &a.common,
        Command::Teleport(a) => &a.common,
        Command::Phasespace(a) => &a.common,
        Command::Verify(a) => a,
        Command::GoldenGen(_) | Command::GoldenCheck(_) => unreachable!("golden commands carry no output options"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cylspace: {e}");
            ExitCode::from(e.code())
        }
    }
}
