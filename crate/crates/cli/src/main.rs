//! `interleave`: verify, decompose, simulate, compose and audit interactive
//! mechanisms from the command line.
//!
//! Exit codes: 0 success or PASS, 1 FAIL, 2 usage or parse error, 3 instance
//! too large for exhaustive verification.

mod commands;
mod formats;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use interleave_core::divergence::Method;

#[derive(Parser, Debug)]
#[command(name = "interleave", version, about = "Exact privacy analysis of concurrently composed interactive mechanisms")]
struct Cli {
    /// Print a JSON report instead of the human summary.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for adversary sweeps and audits (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a privacy claim of a pair against every adversary.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Split an (ε, δ)-DP pair into error systems and a pure ε pair.
    Decompose(DecomposeArgs),
    /// Run an adversary against randomized-response simulators.
    Simulate(SimulateArgs),
    /// Composition calculators for k copies of an (ε, δ) mechanism.
    #[command(name = "compose-calc", subcommand)]
    ComposeCalc(CalcCmd),
    /// Compose RDP, zCDP, tCDP or (ε, δ) budgets.
    #[command(subcommand)]
    Budget(BudgetCmd),
    /// Monte Carlo audits.
    #[command(subcommand)]
    Audit(AuditCmd),
    /// Random test fixtures.
    #[command(subcommand)]
    Fixtures(FixturesCmd),
}

#[derive(Args, Debug, Clone, Copy)]
pub struct SweepArgs {
    /// Largest number of adversaries an exhaustive sweep may visit.
    #[arg(long, env = "INTERLEAVE_CAP", default_value_t = interleave_core::DEFAULT_CAP)]
    pub cap: u128,
    #[arg(long, value_enum, default_value_t = MethodArg::Exhaustive)]
    pub method: MethodArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodArg {
    Exhaustive,
    Induction,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exhaustive => Method::Exhaustive,
            MethodArg::Induction => Method::Induction,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum VerifyCmd {
    /// (ε, δ)-DP.
    Approx {
        pair: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// (α, bound)-RDP.
    Rdp {
        pair: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        bound: f64,
        #[command(flatten)]
        sweep: SweepArgs,
    },
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    pub pair: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Cap on the adversaries used for the identity check.
    #[arg(long, env = "INTERLEAVE_CAP", default_value_t = interleave_core::DEFAULT_CAP)]
    pub cap: u128,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Decomposition files followed by the adversary file.
    #[arg(required = true, num_args = 2..)]
    pub files: Vec<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub b: u8,
}

#[derive(Subcommand, Debug)]
pub enum CalcCmd {
    /// Exact optimal composition.
    Optimal {
        #[command(flatten)]
        base: CalcBase,
        /// Target ε'; repeat for a table.
        #[arg(long = "eps-prime", conflicts_with = "delta_prime")]
        eps_prime: Vec<f64>,
        /// Target δ'; repeat for a table.
        #[arg(long = "delta-prime")]
        delta_prime: Vec<f64>,
    },
    /// Advanced composition with slack δ̃.
    Advanced {
        #[command(flatten)]
        base: CalcBase,
        /// Repeat for a table.
        #[arg(long = "delta-slack", required = true)]
        delta_slack: Vec<f64>,
    },
    /// (kε, kδ).
    Basic {
        #[command(flatten)]
        base: CalcBase,
    },
}

#[derive(Args, Debug, Clone, Copy)]
pub struct CalcBase {
    #[arg(long)]
    pub k: u64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
}

#[derive(Subcommand, Debug)]
pub enum BudgetCmd {
    /// Compose the budgets listed in a JSON file.
    Compose {
        budgets: PathBuf,
        /// Also convert the result to (ε, δ)-DP.
        #[arg(long = "to-dp", requires = "delta")]
        to_dp: bool,
        #[arg(long)]
        delta: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
pub enum AuditCmd {
    /// Audit Guess-and-Check on two neighboring datasets.
    GuessCheck(GuessCheckArgs),
}

#[derive(Args, Debug)]
pub struct GuessCheckArgs {
    pub dataset: PathBuf,
    pub neighbor: PathBuf,
    pub queries: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub c: u32,
    #[arg(long)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub runs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Claimed ε of the whole run (default 4ε).
    #[arg(long)]
    pub claim: Option<f64>,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    /// Audit the broken variant without threshold noise.
    #[arg(long = "no-threshold-noise")]
    pub no_threshold_noise: bool,
}

#[derive(Subcommand, Debug)]
pub enum FixturesCmd {
    /// Write a random valid pair.
    Gen(FixtureArgs),
}

#[derive(Args, Debug)]
pub struct FixtureArgs {
    /// Horizon of both members.
    #[arg(long)]
    pub depth: usize,
    /// Number of queries.
    #[arg(long)]
    pub nx: usize,
    /// Number of responses.
    #[arg(long)]
    pub ny: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "zero-prob", default_value_t = 0.0)]
    pub zero_prob: f64,
    #[arg(long, default_value_t = 0.5)]
    pub closeness: f64,
    /// Output file (default: stdout).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Errors surfaced to the user.
#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Core(interleave_core::Error),
    Io(String),
}

impl CliError {
    /// Prefixes the message with the file it came from.
    pub fn in_file(self, path: &Path) -> Self {
        let p = path.display();
        match self {
            CliError::Parse(m) if m.starts_with(&p.to_string()) => CliError::Parse(m),
            CliError::Parse(m) => CliError::Parse(format!("{p}: {m}")),
            CliError::Core(e @ interleave_core::Error::TooLarge { .. }) => CliError::Core(e),
            CliError::Core(e) => CliError::Parse(format!("{p}: {e}")),
            other => other,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(interleave_core::Error::TooLarge { .. }) => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Core(e @ interleave_core::Error::TooLarge { .. }) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "error: {e}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl From<interleave_core::Error> for CliError {
    fn from(e: interleave_core::Error) -> Self {
        CliError::Core(e)
    }
}

/// What a successful command concluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Parse(format!("--jobs: {e}")))?;
    }
    let json = cli.json;
    match cli.command {
        Command::Verify(c) => commands::verify(c, json),
        Command::Decompose(a) => commands::decompose(a, json),
        Command::Simulate(a) => commands::simulate(a, json),
        Command::ComposeCalc(c) => commands::compose_calc(c, json),
        Command::Budget(BudgetCmd::Compose { budgets, to_dp, delta }) => {
            commands::budget_compose(&budgets, to_dp.then_some(delta).flatten(), json)
        }
        Command::Audit(AuditCmd::GuessCheck(a)) => commands::audit_guess_check(a, json),
        Command::Fixtures(FixturesCmd::Gen(a)) => commands::fixtures_gen(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
