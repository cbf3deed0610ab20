//! Command-line front end: reads system files, writes certificates, gains,
//! interval tables and CSV sweeps.

use std::io::Write;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use delaycert::{EpsilonProfile, SlackMode};

mod commands;
pub mod files;
pub mod parse;

use parse::{Grid, HistorySource};

/// How a command ended when it did not fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Feasible, certified, or simply done.
    Success,
    /// A valid negative answer: infeasible, diverged, violated.
    Negative,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Negative => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "delaycert",
    version,
    about = "Exponential-stability certificates for linear time-delay systems"
)]
pub struct Cli {
    /// JSON file with solver settings.
    #[arg(long, global = true, env = files::SETTINGS_ENV)]
    pub settings: Option<PathBuf>,

    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the stability LMIs at one (α, h) and write a certificate.
    Analyze(AnalyzeArgs),
    /// Feasible delay interval at a fixed decay rate.
    Interval(IntervalArgs),
    /// Feasibility over an (h, α) grid.
    Sweep(SweepArgs),
    /// Synthesize a controller or observer gain.
    Synthesize(SynthesizeArgs),
    /// Integrate the system from an initial function.
    Simulate(SimulateArgs),
    /// Re-verify a certificate file without solving anything.
    CheckCertificate(CheckArgs),
    /// Randomized checks of the integral inequalities.
    VerifyInequalities(InequalityArgs),
}

/// Slack treatment of the stability LMIs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[value(name = "free-slack", alias = "th1")]
    FreeSlack,
    #[value(name = "structured-ones", alias = "cor1-eps1")]
    StructuredOnes,
    #[value(name = "structured-skip-delayed", alias = "cor1-epsneq1")]
    StructuredSkipDelayed,
    #[value(name = "projected", alias = "nullspace")]
    Projected,
}

impl ModeArg {
    pub fn slack_mode(self) -> SlackMode {
        match self {
            ModeArg::FreeSlack => SlackMode::Free,
            ModeArg::StructuredOnes => SlackMode::Structured {
                profile: EpsilonProfile::ONES,
            },
            ModeArg::StructuredSkipDelayed => SlackMode::Structured {
                profile: EpsilonProfile::SKIP_DELAYED,
            },
            ModeArg::Projected => SlackMode::Projected,
        }
    }
}

/// Sweep modes: the LMI modes, plus `spectral` (free slack with an extra
/// characteristic-root column).
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepModeArg {
    #[value(name = "free-slack", alias = "th1")]
    FreeSlack,
    #[value(name = "structured-ones", alias = "cor1-eps1")]
    StructuredOnes,
    #[value(name = "structured-skip-delayed", alias = "cor1-epsneq1")]
    StructuredSkipDelayed,
    #[value(name = "projected", alias = "nullspace")]
    Projected,
    Spectral,
}

impl SweepModeArg {
    pub fn lmi_mode(self) -> ModeArg {
        match self {
            SweepModeArg::FreeSlack | SweepModeArg::Spectral => ModeArg::FreeSlack,
            SweepModeArg::StructuredOnes => ModeArg::StructuredOnes,
            SweepModeArg::StructuredSkipDelayed => ModeArg::StructuredSkipDelayed,
            SweepModeArg::Projected => ModeArg::Projected,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Controller,
    Observer,
}

fn profile_parser(s: &str) -> Result<EpsilonProfile, String> {
    parse::parse_profile(s).map_err(|e| e.to_string())
}

fn grid_parser(s: &str) -> Result<Grid, String> {
    s.parse().map_err(|e: anyhow::Error| e.to_string())
}

fn history_parser(s: &str) -> Result<HistorySource, String> {
    s.parse().map_err(|e: anyhow::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub system: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "free-slack")]
    pub mode: ModeArg,
    /// Use this delay instead of the one in the file.
    #[arg(long)]
    pub delay: Option<f64>,
    /// Certificate output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Options for controlled-form systems.
#[derive(Debug, Args)]
pub struct GainOptions {
    /// Gain problem to search (controlled systems only).
    #[arg(long, value_enum, default_value = "controller")]
    pub kind: KindArg,
    /// Slack multipliers: `ones`, `skip-delayed`, or `e1,e2,e3,e4`.
    #[arg(long, value_parser = profile_parser, default_value = "skip-delayed")]
    pub profile: EpsilonProfile,
}

#[derive(Debug, Args)]
pub struct IntervalArgs {
    pub system: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Slack mode (analysis systems only).
    #[arg(long, value_enum, default_value = "free-slack")]
    pub mode: ModeArg,
    #[command(flatten)]
    pub gain: GainOptions,
    #[arg(long, default_value_t = delaycert::search::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = delaycert::search::DEFAULT_H_RANGE.0)]
    pub h_lo: f64,
    #[arg(long, default_value_t = delaycert::search::DEFAULT_H_RANGE.1)]
    pub h_hi: f64,
    /// Also write the CSV row (with header) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub system: PathBuf,
    /// Delays as `lo:hi:count` or `h1,h2,...`.
    #[arg(long, value_parser = grid_parser)]
    pub h_grid: Grid,
    /// Decay rates as `lo:hi:count` or `a1,a2,...`.
    #[arg(long, value_parser = grid_parser)]
    pub alpha_grid: Grid,
    #[arg(long, value_enum, default_value = "free-slack")]
    pub mode: SweepModeArg,
    #[command(flatten)]
    pub gain: GainOptions,
    /// Grid CSV output path (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-delay frontier CSV output path.
    #[arg(long)]
    pub frontier_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    pub system: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[command(flatten)]
    pub gain: GainOptions,
    #[arg(long)]
    pub delay: Option<f64>,
    /// Gain file output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Certificate of the closed loop (or error dynamics) output path.
    #[arg(long)]
    pub certificate_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub system: PathBuf,
    /// `constant:v1,v2`, `poly:c0;c1;...`, `random:seed[:degree]` or `file:path`.
    /// Defaults to the constant 1 in every component.
    #[arg(long, value_parser = history_parser)]
    pub history: Option<HistorySource>,
    /// Horizon.
    #[arg(long = "T", alias = "horizon", default_value_t = 20.0)]
    pub horizon: f64,
    /// Step size (default h/64; must not exceed h/16).
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub delay: Option<f64>,
    /// Certificate whose envelope and functional are checked along the run.
    #[arg(long)]
    pub certificate: Option<PathBuf>,
    /// Controller gain file (controlled systems).
    #[arg(long)]
    pub controller: Option<PathBuf>,
    /// Observer gain file (controlled systems).
    #[arg(long)]
    pub observer: Option<PathBuf>,
    /// Trajectory CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include derivative columns in the CSV.
    #[arg(long)]
    pub derivatives: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub certificate: PathBuf,
    /// Also require the embedded system to match this file.
    #[arg(long)]
    pub system: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InequalityArgs {
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs one parsed command line, writing human-readable output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<Outcome> {
    let settings = files::load_settings(cli.settings.as_deref())?;
    match &cli.command {
        Command::Analyze(a) => commands::analyze(a, &settings, out),
        Command::Interval(a) => commands::interval(a, &settings, out),
        Command::Sweep(a) => commands::sweep(a, &settings, out),
        Command::Synthesize(a) => commands::synthesize(a, &settings, out),
        Command::Simulate(a) => commands::simulate(a, out),
        Command::CheckCertificate(a) => commands::check_certificate(a, out),
        Command::VerifyInequalities(a) => commands::verify_inequalities(a, out),
    }
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}
