use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

mod commands;
mod manifest;
mod output;

use manifest::Run;

/// Exit status for a violated precondition.
const EXIT_PRECONDITION: u8 = 2;
/// Exit status for an exhausted budget; partial output has been written.
const EXIT_BUDGET: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "critlab", version, about = "Second-gradient mappings, Jacobian critical sets, and regime classification")]
struct Cli {
    /// Worker threads (default: machine parallelism). CRITLAB_THREADS overrides this flag.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify one (n, q, a, d) tuple.
    Classify(commands::regimes::ClassifyArgs),
    /// Classify a grid of tuples and write a CSV table.
    Sweep(commands::regimes::SweepArgs),
    /// Evaluate a map, its gradient, and its Jacobian at one point.
    Eval(commands::maps::EvalArgs),
    /// Compare closed-form derivatives with finite differences on a point list.
    Diffcheck(commands::maps::DiffcheckArgs),
    /// Cantor-type squeeze schedules.
    #[command(subcommand)]
    Cantor(commands::cantor::CantorCommand),
    /// Integrate the second-gradient and inverse-Jacobian energies.
    Energy(commands::maps::EnergyArgs),
    /// Box-counting slope of the near-critical set.
    Dimension(commands::maps::DimensionArgs),
    /// Sampled injectivity, degree, sign, mollification, and distortion checks.
    #[command(subcommand)]
    Verify(commands::verify::VerifyCommand),
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Precondition(anyhow::Error),
    Budget(anyhow::Error),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<critlab::Error>() {
            Some(critlab::Error::Budget(_)) => Failure::Budget(e),
            Some(c) if c.is_precondition() => Failure::Precondition(e),
            _ => Failure::Other(e),
        }
    }
}

impl From<critlab::Error> for Failure {
    fn from(e: critlab::Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

/// What a command produced.
pub enum Outcome {
    Done,
    /// Output was written but a work budget ran out before convergence.
    BudgetExhausted(String),
}

pub type CmdResult = Result<Outcome, Failure>;

fn thread_count(flag: Option<usize>) -> anyhow::Result<usize> {
    let env = std::env::var("CRITLAB_THREADS").ok();
    let chosen = match env.as_deref() {
        Some(v) => Some(v.trim().parse::<usize>().map_err(|_| anyhow::anyhow!("CRITLAB_THREADS={v:?} is not a count"))?),
        None => flag,
    };
    Ok(match chosen {
        Some(0) => anyhow::bail!("thread count must be positive"),
        Some(t) => t,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_PRECONDITION);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    let mut run = Run::new(std::env::args().collect(), threads, Instant::now());
    let result = match cli.command {
        Command::Classify(a) => commands::regimes::classify(a, &mut run),
        Command::Sweep(a) => commands::regimes::sweep(a, &mut run),
        Command::Eval(a) => commands::maps::eval(a, &mut run),
        Command::Diffcheck(a) => commands::maps::diffcheck(a, &mut run),
        Command::Cantor(c) => commands::cantor::run(c, &mut run),
        Command::Energy(a) => commands::maps::energy(a, &mut run),
        Command::Dimension(a) => commands::maps::dimension(a, &mut run),
        Command::Verify(c) => commands::verify::run(c, &mut run),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::BudgetExhausted(msg)) => {
            eprintln!("budget exhausted: {msg}");
            ExitCode::from(EXIT_BUDGET)
        }
        Err(Failure::Precondition(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_PRECONDITION)
        }
        Err(Failure::Budget(e)) => {
            eprintln!("budget exhausted: {e:#}");
            ExitCode::from(EXIT_BUDGET)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// `--out` shared by every writing command.
#[derive(Args, Debug, Clone)]
pub struct OutArg {
    /// Output file; a `<out>.manifest.json` sidecar records the run.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}
