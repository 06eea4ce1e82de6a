//! `mhp`: command-line front end for multivariate Hawkes process models
//! observed as interval counts.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid input, 3 runtime failure,
//! degenerate estimate or interruption.

mod args;
mod commands;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde_json::{Map, Value};

use args::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(mhp_core::Error),
    /// Finished, but the result is not usable.
    Runtime(String),
}

impl From<mhp_core::Error> for CliError {
    fn from(e: mhp_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(_) | CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn read_config(path: Option<&Path>) -> Result<(Map<String, Value>, Option<u64>), CliError> {
    let Some(path) = path else {
        return Ok((Map::new(), None));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let Value::Object(mut map) =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?
    else {
        return Err(CliError::Usage("config file must hold a JSON object".into()));
    };
    let threads = match map.remove("threads") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_u64()
                .filter(|&k| k > 0)
                .ok_or_else(|| CliError::Usage("config threads must be a positive integer".into()))?,
        ),
    };
    Ok((map, threads))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (config, config_threads) = read_config(cli.config.as_deref())?;
    let threads = cli.threads.or(config_threads);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        pool = pool.num_threads(k as usize);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => commands::simulate(&args::merge(a, &config)?),
        Command::Loglik(a) => commands::loglik(&args::merge(a, &config)?),
        Command::Fit(a) => commands::fit(&args::merge(a, &config)?),
        Command::Mle(a) => commands::mle(&args::merge(a, &config)?),
        Command::Envelope(a) => commands::envelope(&args::merge(a, &config)?),
        Command::Summarize(a) => commands::summarize(&args::merge(a, &config)?),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
