//! Command-line front end. All numerics come from a `key = value` config
//! file; the command line only picks the command and the file.

pub mod commands;
pub mod config;

use std::path::Path;
use std::time::Instant;

pub use commands::{
    base_params, cmd_datagen, cmd_equiv, cmd_eval, cmd_gradcheck, cmd_recover, cmd_train, dataset_spec, mean_mse, metrics_csv,
    recover_split, train_config, MetricRow, Method, Outcome, RecoverSettings, DEFAULT_LAMBDA1, DEFAULT_LAMBDA2,
};
pub use config::RunConfig;

use crate::error::Error;

pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION_FAILED: i32 = 1;
    pub const BAD_CONFIG: i32 = 2;
    pub const IO: i32 = 3;
    pub const DIVERGED: i32 = 4;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Datagen,
    Recover,
    Train,
    Gradcheck,
    Equiv,
    Eval,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Datagen => "datagen",
            Command::Recover => "recover",
            Command::Train => "train",
            Command::Gradcheck => "gradcheck",
            Command::Equiv => "equiv",
            Command::Eval => "eval",
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Malformed { .. } => exit::IO,
        Error::NonFinite { .. } | Error::NoConvergence { .. } => exit::DIVERGED,
        Error::Config { .. } | Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => exit::BAD_CONFIG,
        Error::TapeMismatch { .. } => exit::VALIDATION_FAILED,
    }
}

/// Runs `command` with the config at `config_path` and returns the exit code.
pub fn run(command: Command, config_path: &Path) -> i32 {
    let start = Instant::now();
    let result = RunConfig::load(config_path).and_then(|cfg| match command {
        Command::Datagen => cmd_datagen(&cfg),
        Command::Recover => cmd_recover(&cfg),
        Command::Train => cmd_train(&cfg),
        Command::Gradcheck => cmd_gradcheck(&cfg),
        Command::Equiv => cmd_equiv(&cfg),
        Command::Eval => cmd_eval(&cfg),
    });
    let code = match result {
        Ok(Outcome::Success) => exit::OK,
        Ok(Outcome::ValidationFailed) => exit::VALIDATION_FAILED,
        Ok(Outcome::Diverged) => exit::DIVERGED,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    eprintln!("{} finished in {:.2}s", command.name(), start.elapsed().as_secs_f64());
    code
}
