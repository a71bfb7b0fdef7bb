use std::path::PathBuf;

use clap::{Parser, Subcommand};
use sista::cli::{self, Command};

#[derive(Parser)]
#[command(name = "sista", version, about = "Sequential sparse recovery and unfolded SISTA networks")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset
    Datagen { config: PathBuf },
    /// Run ISTA/SISTA on a dataset split and write per-sequence metrics
    Recover { config: PathBuf },
    /// Train an unfolded network
    Train { config: PathBuf },
    /// Finite-difference check of the analytic gradients
    Gradcheck { config: PathBuf },
    /// Check SISTA against its unfolded network on random instances
    Equiv { config: PathBuf },
    /// Evaluate a checkpoint on a dataset split
    Eval { config: PathBuf },
}

fn main() {
    let args = Args::parse();
    let (command, config) = match args.command {
        Cmd::Datagen { config } => (Command::Datagen, config),
        Cmd::Recover { config } => (Command::Recover, config),
        Cmd::Train { config } => (Command::Train, config),
        Cmd::Gradcheck { config } => (Command::Gradcheck, config),
        Cmd::Equiv { config } => (Command::Equiv, config),
        Cmd::Eval { config } => (Command::Eval, config),
    };
    std::process::exit(cli::run(command, &config));
}
