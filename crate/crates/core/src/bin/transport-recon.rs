use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use transport_recon::experiment::{
    load_config, run_forward, run_recur_demo, run_reconstruct, run_verify, RunError, Stage,
};
use transport_recon::Error;

#[derive(Parser)]
#[command(version, about = "Recover D and sigma from two interior solutions by the transport method")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problem and dump u1, u2
    Forward(Args),
    /// Trace streamlines and recover D and sigma
    Reconstruct(Args),
    /// Identity, divergence, monotonicity and no-return suites at two resolutions
    Verify(Args),
    /// Time-one orbits of a rotation and of D·X
    RecurDemo(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Overrides outputs.directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), RunError> {
    let Ok(raw) = std::env::var("TRANSPORT_RECON_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| RunError {
        stage: Stage::Config,
        source: Error::Config(format!(
            "TRANSPORT_RECON_THREADS must be a positive integer, got '{raw}'"
        )),
    })?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| RunError {
        stage: Stage::Config,
        source: Error::Config(format!("thread pool: {e}")),
    })
}

fn run(cli: Cli) -> Result<PathBuf, RunError> {
    configure_threads()?;
    let (args, which) = match &cli.command {
        Command::Forward(a) => (a, 0),
        Command::Reconstruct(a) => (a, 1),
        Command::Verify(a) => (a, 2),
        Command::RecurDemo(a) => (a, 3),
    };
    let cfg = load_config(&args.config, args.out.as_deref())?;
    match which {
        0 => run_forward(&cfg).map(drop),
        1 => run_reconstruct(&cfg).map(drop),
        2 => run_verify(&cfg).map(drop),
        _ => run_recur_demo(&cfg).map(drop),
    }?;
    Ok(cfg.outputs.directory)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
