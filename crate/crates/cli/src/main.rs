use certrl_cli::commands::{cmd_attack, cmd_certify, cmd_oracle, CmdError};
use certrl_cli::{EXIT_CONFIG, EXIT_RUNTIME};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Certification and attack experiments for smoothed RL policies.
#[derive(Parser)]
#[command(name = "certrl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for rollouts (default: one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Certified lower bounds over a budget grid; emits CSV.
    Certify { config: PathBuf },
    /// Empirical attack means over a budget grid; emits CSV.
    Attack { config: PathBuf },
    /// Conjugate/budget/duality oracle suites; emits max deviations.
    Oracle { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("certrl: cannot configure {workers} workers: {e}");
            return ExitCode::from(EXIT_RUNTIME as u8);
        }
    }
    let out = cli.out.as_deref();
    let result = match &cli.command {
        Command::Certify { config } => cmd_certify(config, out),
        Command::Attack { config } => cmd_attack(config, out),
        Command::Oracle { config } => cmd_oracle(config, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Config(msg)) => {
            eprintln!("certrl: {msg}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
        Err(CmdError::Runtime(msg)) => {
            eprintln!("certrl: {msg}");
            ExitCode::from(EXIT_RUNTIME as u8)
        }
    }
}
