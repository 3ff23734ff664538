use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mcgpc_cli::{run_convergence, run_experiment, run_oracle, with_threads, CliError, Config, Overrides};

#[derive(Parser)]
#[command(name = "mcgpc", version, about = "MC-gPC simulation of swarming models with random inputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed (overrides `particles.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one experiment and write statistics, densities and snapshots.
    Run { config: PathBuf },
    /// Sweep M, S or N and tabulate the temperature error against a reference.
    Converge {
        config: PathBuf,
        /// `M=1,2,3`, `S=10,100` or `N=1000,10000`.
        #[arg(long)]
        sweep: String,
    },
    /// Solve the homogeneous mean-field problem on a velocity grid.
    Oracle { config: PathBuf },
}

fn execute(cli: Cli) -> Result<PathBuf, CliError> {
    let overrides = Overrides { out: cli.out, seed: cli.seed };
    let path = match &cli.command {
        Command::Run { config } | Command::Converge { config, .. } | Command::Oracle { config } => config,
    };
    let mut cfg = Config::load(path)?;
    overrides.apply(&mut cfg);
    with_threads(cli.threads, || match &cli.command {
        Command::Run { .. } => run_experiment(&cfg),
        Command::Converge { sweep, .. } => run_convergence(&cfg, sweep),
        Command::Oracle { .. } => run_oracle(&cfg),
    })
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mcgpc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
