mod args;
mod commands;
mod config;
mod error;
mod output;
mod reference;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::RunConfig;
use error::CliError;

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn init_threads(flag: Option<usize>) -> Result<(), CliError> {
    let threads = match flag {
        Some(t) => Some(t),
        None => match std::env::var("TRUNC_FPCA_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("TRUNC_FPCA_THREADS is not a count: {v}")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_logging(cli.verbose);
    init_threads(cli.threads)?;
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a, &cfg),
        Command::Validate(a) => commands::validate(a, &cfg),
        Command::FitMean(a) => commands::fit_mean(a, &cfg),
        Command::FitCov(a) => commands::fit_cov(a, &cfg),
        Command::Scores(a) => commands::scores(a, &cfg),
        Command::Gflm(a) => commands::gflm(a, &cfg),
        Command::Reproduce(a) => commands::reproduce(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(64)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
