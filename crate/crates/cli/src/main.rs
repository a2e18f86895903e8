//! `rdd`: command-line front end for the road-damage toolkit.

mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use config::FileConfig;

/// Failure classes and their exit codes: usage 1, data 2, I/O 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Io(m) => m,
        }
    }
}

impl From<rdd_core::Error> for CliError {
    fn from(e: rdd_core::Error) -> Self {
        let msg = e.to_string();
        match e {
            rdd_core::Error::Config(_) => CliError::Usage(msg),
            e if e.is_io() => CliError::Io(msg),
            _ => CliError::Data(msg),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    if let Some(jobs) = cli.jobs.or(cfg.jobs) {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Stats(a) => commands::stats(a, &cfg),
        Command::Split(a) => commands::split(a, &cfg),
        Command::Eval(a) => commands::eval(a, &cfg),
        Command::Sweep(a) => commands::sweep(a, &cfg),
        Command::Augment(a) => commands::augment(a, &cfg),
        Command::Submit(a) => commands::submit(a, &cfg),
        Command::MergeLabels(a) => commands::merge_labels(a, &cfg),
        Command::Report(c) => commands::report(c, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = e.message().lines().next().unwrap_or("");
            eprintln!("error: {line}");
            ExitCode::from(e.exit_code())
        }
    }
}
