//! Command-line flags. Every option is optional at the clap level so that a
//! `--config` file can supply it; flags win over the file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "mhp", version, about = "Fit multivariate Hawkes processes to interval count data")]
pub struct Cli {
    /// Worker threads; results do not depend on this
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// JSON file holding any of the subcommand's options; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an event path and optionally aggregate it into counts
    Simulate(SimulateArgs),
    /// Repeated particle-filter estimates of the log-likelihood
    Loglik(LoglikArgs),
    /// Particle marginal Metropolis-Hastings fit to interval counts
    Fit(FitArgs),
    /// Maximum likelihood fit to exactly observed event times
    Mle(MleArgs),
    /// Quantile envelope of simulated cumulative counts
    Envelope(EnvelopeArgs),
    /// Recompute the summary table and diagnostics from a chain file
    Summarize(SummarizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalArg {
    Uniform,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaKindArg {
    Sd,
    Variance,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be positive, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..1.0).contains(&v) => Ok(v),
        Ok(v) => Err(format!("must lie in [0, 1), got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// Model structure (JSON)
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Parameter values (JSON)
    #[arg(long, value_name = "FILE")]
    pub theta: Option<PathBuf>,
    /// End of the observation period
    #[arg(long, value_name = "T", value_parser = positive_f64)]
    pub horizon: Option<f64>,
    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Event CSV to write (time,type)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Window width, a grid CSV with a boundary column, or a counts CSV
    #[arg(long, value_name = "WIDTH|FILE")]
    pub aggregate: Option<String>,
    /// Counts CSV to write [default: <out>.counts.csv]
    #[arg(long, value_name = "FILE")]
    pub counts_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoglikArgs {
    /// Counts CSV (daily or boundary schema)
    #[arg(long, value_name = "FILE")]
    pub counts: Option<PathBuf>,
    /// Model structure (JSON)
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Parameter values (JSON)
    #[arg(long, value_name = "FILE")]
    pub theta: Option<PathBuf>,
    /// Particles per estimate [default: 200]
    #[arg(long, value_name = "J")]
    pub particles: Option<usize>,
    /// Proposal for event times within a window [default: uniform]
    #[arg(long, value_enum)]
    pub proposal: Option<ProposalArg>,
    /// Resample only when ESS falls below this fraction of the particles
    #[arg(long, value_name = "FRACTION")]
    pub ess_threshold: Option<f64>,
    /// Number of independent estimates [default: 1]
    #[arg(long, value_name = "R")]
    pub reps: Option<usize>,
    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitArgs {
    /// Counts CSV (daily or boundary schema)
    #[arg(long, value_name = "FILE")]
    pub counts: Option<PathBuf>,
    /// Model structure (JSON)
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Starting parameter values (JSON) [default: from the data]
    #[arg(long, value_name = "FILE")]
    pub init: Option<PathBuf>,
    /// Chain length [default: 5000]
    #[arg(long, value_name = "N")]
    pub iters: Option<usize>,
    /// Random-walk jump size [default: 0.12]
    #[arg(long, value_parser = positive_f64)]
    pub delta: Option<f64>,
    /// Read --delta as a standard deviation or a variance [default: sd]
    #[arg(long, value_enum)]
    pub delta_kind: Option<DeltaKindArg>,
    /// Walk on log parameters instead of raw values
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub log_scale: Option<bool>,
    /// Particles per likelihood estimate [default: 200]
    #[arg(long, value_name = "J")]
    pub particles: Option<usize>,
    /// Proposal for event times within a window [default: uniform]
    #[arg(long, value_enum)]
    pub proposal: Option<ProposalArg>,
    /// Resample only when ESS falls below this fraction of the particles
    #[arg(long, value_name = "FRACTION")]
    pub ess_threshold: Option<f64>,
    /// Leading fraction of the chain dropped before summarizing [default: 0.1]
    #[arg(long, value_name = "FRACTION", value_parser = fraction)]
    pub burn_in: Option<f64>,
    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Chain output, one JSON record per line
    #[arg(long, value_name = "FILE")]
    pub chain: Option<PathBuf>,
    /// Summary table CSV
    #[arg(long, value_name = "FILE")]
    pub summary: Option<PathBuf>,
    /// Summary table as versioned JSON
    #[arg(long, value_name = "FILE")]
    pub summary_json: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MleArgs {
    /// Event CSV (time,type)
    #[arg(long, value_name = "FILE")]
    pub events: Option<PathBuf>,
    /// Model structure (JSON)
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Starting parameter values (JSON)
    #[arg(long, value_name = "FILE")]
    pub init: Option<PathBuf>,
    /// End of the observation period [default: last event time]
    #[arg(long, value_name = "T", value_parser = positive_f64)]
    pub horizon: Option<f64>,
    /// Table CSV [default: stdout]
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Fitted parameter values (JSON)
    #[arg(long, value_name = "FILE")]
    pub theta_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeArgs {
    /// Parameter values (JSON)
    #[arg(long, value_name = "FILE")]
    pub theta: Option<PathBuf>,
    /// Model structure (JSON)
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Window width, a grid CSV with a boundary column, or a counts CSV
    #[arg(long, value_name = "WIDTH|FILE")]
    pub grid: Option<String>,
    /// End of the period; required when --grid is a width
    #[arg(long, value_name = "T", value_parser = positive_f64)]
    pub horizon: Option<f64>,
    /// Simulated paths [default: 1000]
    #[arg(long, value_name = "S")]
    pub reps: Option<usize>,
    /// Comma-separated probabilities [default: 0.025,0.5,0.975]
    #[arg(long, value_delimiter = ',')]
    pub quantiles: Option<Vec<f64>>,
    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Envelope CSV [default: stdout]
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummarizeArgs {
    /// Chain file written by fit
    #[arg(long, value_name = "FILE")]
    pub chain: Option<PathBuf>,
    /// Model structure (JSON), for parameter names
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Leading fraction of the chain dropped [default: 0.1]
    #[arg(long, value_name = "FRACTION", value_parser = fraction)]
    pub burn_in: Option<f64>,
    /// Summary table CSV [default: stdout]
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Summary table as versioned JSON
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
    /// Directory for the diagnostics tables
    #[arg(long, value_name = "DIR")]
    pub diagnostics: Option<PathBuf>,
}

/// Overlays the flags that were given onto the config file values.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: &Map<String, Value>) -> Result<T, CliError> {
    let Value::Object(given) = serde_json::to_value(flags).map_err(|e| CliError::Usage(e.to_string()))? else {
        unreachable!("argument structs serialize to objects")
    };
    let mut merged = config.clone();
    for (k, v) in given {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("config file: {e}")))
}

pub fn required<T: Clone>(value: &Option<T>, flag: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
}
