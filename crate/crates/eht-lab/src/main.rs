use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eht_lab::config::{self, Prepared};
use eht_lab::error::CliError;
use eht_lab::{analyze, simulate, sweep, verify};

#[derive(Parser)]
#[command(
    name = "eht-lab",
    about = "Analyze, simulate, verify, and sweep hypothesis-testing learning dynamics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    config: PathBuf,
    /// Output directory; overrides the config's outputs.directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for this invocation.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact analysis: consistent states, potentials, stable set.
    Analyze(CommonArgs),
    /// Seeded trajectory replications and occupancy statistics.
    Simulate(CommonArgs),
    /// Invariant checks, assumption certificates, test calibration.
    Verify(CommonArgs),
    /// Stationary mass and slope checks across a perturbation grid.
    Sweep(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Analyze(a) | Command::Simulate(a) | Command::Verify(a) | Command::Sweep(a) => a,
        }
    }
}

fn setup(args: &CommonArgs) -> Result<(Prepared, PathBuf), CliError> {
    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        // A pool may already exist (e.g. under a test harness); that is
        // fine, the flag is best effort then.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let mut config = config::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.output_directory().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let cap = config::state_cap()?;
    let prepared = config::prepare(config, cap)?;
    Ok((prepared, out_dir))
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    let (prepared, out_dir) = setup(command.args())?;
    match command {
        Command::Analyze(_) => analyze::cmd_analyze(&prepared, &out_dir).map(|_| ()),
        Command::Simulate(_) => simulate::cmd_simulate(&prepared, &out_dir).map(|_| ()),
        Command::Verify(_) => verify::cmd_verify(&prepared, &out_dir).map(|_| ()),
        Command::Sweep(_) => sweep::cmd_sweep(&prepared, &out_dir).map(|_| ()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
