use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::Serialize;

use mhp_core::diagnostics::{chain_diagnostics, write_autocorrelation, write_histograms, write_trace};
use mhp_core::io::{self as mio, ChainWriter, CountsSchema, SummaryDocument};
use mhp_core::pmmh::{self, ChainInit, DeltaKind, ParameterSummary, PmmhConfig};
use mhp_core::rng::{derive_seed, Purpose};
use mhp_core::smc::{smc_log_likelihood, Proposal, Resampling, SmcConfig};
use mhp_core::special::NORMAL_Q975;
use mhp_core::{aggregate, exact, par, simulate, AggregationGrid, ModelSpec, ParameterVector};

use crate::args::*;
use crate::CliError;

const HISTOGRAM_BINS: usize = 40;

fn read_model(path: &Path) -> Result<ModelSpec, CliError> {
    Ok(mio::read_json(path)?)
}

fn read_theta(path: &Path) -> Result<ParameterVector, CliError> {
    Ok(mio::read_json(path)?)
}

/// A number is a window width over `(0, horizon]`; anything else is a grid file.
fn resolve_grid(spec: &str, horizon: Option<f64>) -> Result<AggregationGrid, CliError> {
    match spec.parse::<f64>() {
        Ok(width) => {
            let horizon = horizon.ok_or_else(|| CliError::Usage("a grid width needs --horizon".into()))?;
            if !(width > 0.0 && width.is_finite()) {
                return Err(CliError::Usage(format!("grid width must be positive, got {width}")));
            }
            Ok(AggregationGrid::uniform(horizon, width)?)
        }
        Err(_) => Ok(mio::read_grid_csv(spec)?),
    }
}

/// Buffered output to a file, or to stdout when no path is given.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(mhp_core::Error::Io)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn finish(mut w: Box<dyn Write>) -> Result<(), CliError> {
    w.flush().map_err(mhp_core::Error::Io)?;
    Ok(())
}

fn smc_config(particles: usize, proposal: Option<ProposalArg>, ess: Option<f64>, seed: u64) -> SmcConfig {
    let proposal = match proposal.unwrap_or(ProposalArg::Uniform) {
        ProposalArg::Uniform => Proposal::OrderedUniform,
        ProposalArg::Poisson => Proposal::PoissonRate95,
    };
    SmcConfig {
        particles,
        proposal,
        resampling: match ess {
            Some(fraction) => Resampling::EssThreshold { fraction },
            None => Resampling::EveryStep,
        },
        seed,
        ..SmcConfig::default()
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let spec = read_model(&required(&a.model, "model")?)?;
    let theta = read_theta(&required(&a.theta, "theta")?)?;
    let horizon = required(&a.horizon, "horizon")?;
    let out = required(&a.out, "out")?;
    let grid = a.aggregate.as_deref().map(|g| resolve_grid(g, Some(horizon))).transpose()?;

    let path = simulate::simulate_path(&spec, &theta, horizon, a.seed.unwrap_or(0))?;
    mio::write_events_csv(&out, &path)?;
    if let Some(grid) = grid {
        let counts = aggregate(&path, &grid, spec.dimension())?;
        let target = a.counts_out.clone().unwrap_or_else(|| {
            let mut p = out.clone().into_os_string();
            p.push(".counts.csv");
            PathBuf::from(p)
        });
        mio::write_counts_csv(target, &counts, CountsSchema::Boundaries)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct LoglikSummary {
    reps: usize,
    particles: usize,
    #[serde(with = "mhp_core::serde_ext::float")]
    mean: f64,
    /// Sample variance; absent for a single estimate.
    variance: Option<f64>,
    degenerate: usize,
}

pub fn loglik(a: &LoglikArgs) -> Result<(), CliError> {
    let counts = mio::read_counts_csv(required(&a.counts, "counts")?, CountsSchema::Auto)?;
    let spec = read_model(&required(&a.model, "model")?)?;
    let theta = read_theta(&required(&a.theta, "theta")?)?;
    let reps = a.reps.unwrap_or(1);
    if reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let seed = a.seed.unwrap_or(0);
    let base = smc_config(a.particles.unwrap_or(200), a.proposal, a.ess_threshold, 0);
    base.check()?;

    let results = par::map_indices(reps, |r| {
        let mut cfg = base.clone();
        cfg.seed = derive_seed(seed, Purpose::Replicate, &[r as u64]);
        smc_log_likelihood(&spec, &theta, &counts, &cfg)
    });
    let mut estimates = Vec::with_capacity(reps);
    let mut degenerate = 0;
    for r in results {
        let r = r?;
        degenerate += usize::from(r.degenerate);
        estimates.push(r.log_likelihood_estimate);
    }

    let n = reps as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let variance = (reps > 1 && degenerate == 0)
        .then(|| estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0));
    let mut w = output(None)?;
    for x in &estimates {
        writeln!(w, "{x}").map_err(mhp_core::Error::Io)?;
    }
    let summary = LoglikSummary {
        reps,
        particles: base.particles,
        mean,
        variance,
        degenerate,
    };
    writeln!(w, "{}", serde_json::to_string(&summary).map_err(mhp_core::Error::Json)?).map_err(mhp_core::Error::Io)?;
    finish(w)?;
    if degenerate > 0 {
        return Err(CliError::Runtime(format!(
            "{degenerate} of {reps} estimates were degenerate: every particle died in some window"
        )));
    }
    Ok(())
}

pub fn fit(a: &FitArgs) -> Result<(), CliError> {
    let counts = mio::read_counts_csv(required(&a.counts, "counts")?, CountsSchema::Auto)?;
    let spec = read_model(&required(&a.model, "model")?)?;
    let chain_path = required(&a.chain, "chain")?;
    let summary_path = required(&a.summary, "summary")?;
    let delta = a.delta.unwrap_or(0.12);
    if !(delta > 0.0) {
        return Err(CliError::Usage(format!("--delta must be positive, got {delta}")));
    }
    let burn_in = a.burn_in.unwrap_or(0.1);
    let pmmh_cfg = PmmhConfig {
        iterations: a.iters.unwrap_or(5000),
        delta,
        delta_kind: match a.delta_kind {
            Some(DeltaKindArg::Variance) => DeltaKind::Variance,
            _ => DeltaKind::StandardDeviation,
        },
        particles: a.particles.unwrap_or(200),
        burn_in_fraction: burn_in,
        seed: a.seed.unwrap_or(0),
        init: match &a.init {
            Some(p) => ChainInit::Given(read_theta(p)?),
            None => ChainInit::Heuristic,
        },
        log_scale: a.log_scale.unwrap_or(false),
        scales: None,
    };
    let smc = smc_config(pmmh_cfg.particles, a.proposal, a.ess_threshold, 0);

    let interrupted = Arc::new(AtomicBool::new(false));
    {
        let flag = interrupted.clone();
        // a second handler cannot be installed; only matters in tests
        let _ = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst));
    }

    let mut writer = ChainWriter::create(&chain_path)?;
    let mut chain = Vec::with_capacity(pmmh_cfg.iterations);
    let mut write_error = None;
    let stats = pmmh::run_chain_streaming(&spec, &counts, &smc, &pmmh_cfg, |record| {
        if let Err(e) = writer.write(record) {
            write_error = Some(e);
            return ControlFlow::Break(());
        }
        chain.push(record.clone());
        if interrupted.load(Ordering::SeqCst) {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    if let Some(e) = write_error {
        return Err(e.into());
    }
    if interrupted.load(Ordering::SeqCst) {
        return Err(CliError::Runtime(format!(
            "interrupted after {} iterations; partial chain flushed to {}",
            chain.len(),
            chain_path.display()
        )));
    }

    let names = spec.free_names();
    let rows = pmmh::summarize(&chain, &names, burn_in)?;
    mio::write_summary_csv(&summary_path, &rows)?;
    if let Some(p) = &a.summary_json {
        let mut doc = SummaryDocument::new(rows);
        doc.records = Some(chain.len());
        doc.burn_in_fraction = Some(burn_in);
        doc.acceptance_rate = Some(stats.accepted as f64 / stats.iterations.max(1) as f64);
        mio::write_json(p, &doc)?;
    }
    eprintln!(
        "{} iterations, acceptance rate {:.3}",
        stats.iterations,
        stats.accepted as f64 / stats.iterations.max(1) as f64
    );
    Ok(())
}

pub fn mle(a: &MleArgs) -> Result<(), CliError> {
    let spec = read_model(&required(&a.model, "model")?)?;
    let init = read_theta(&required(&a.init, "init")?)?;
    let events = mio::read_events_csv(required(&a.events, "events")?, a.horizon, spec.dimension())?;
    let fit = exact::mle_fit(&spec, &events, &init)?;
    let rows: Vec<ParameterSummary> = fit
        .names
        .iter()
        .zip(fit.estimate.iter().zip(&fit.standard_errors))
        .map(|(name, (&estimate, &se))| ParameterSummary {
            parameter: name.clone(),
            estimate,
            se,
            ci_low: estimate - NORMAL_Q975 * se,
            ci_high: estimate + NORMAL_Q975 * se,
        })
        .collect();
    let mut w = output(a.out.as_deref())?;
    mio::write_summary(&mut w, &rows)?;
    finish(w)?;
    if let Some(p) = &a.theta_out {
        mio::write_json(p, &fit.theta)?;
    }
    eprintln!(
        "log-likelihood {} after {} iterations{}",
        fit.log_likelihood,
        fit.iterations,
        if fit.converged { "" } else { " (not converged)" }
    );
    Ok(())
}

pub fn envelope(a: &EnvelopeArgs) -> Result<(), CliError> {
    let spec = read_model(&required(&a.model, "model")?)?;
    let theta = read_theta(&required(&a.theta, "theta")?)?;
    let grid = resolve_grid(&required(&a.grid, "grid")?, a.horizon)?;
    let quantiles = a.quantiles.clone().unwrap_or_else(|| vec![0.025, 0.5, 0.975]);
    let env = pmmh::posterior_predictive_envelope(
        &theta,
        &spec,
        &grid,
        a.reps.unwrap_or(1000),
        &quantiles,
        a.seed.unwrap_or(0),
    )?;
    let mut w = output(a.out.as_deref())?;
    mio::write_envelope(&mut w, &env)?;
    finish(w)
}

pub fn summarize(a: &SummarizeArgs) -> Result<(), CliError> {
    let chain = mio::read_chain_jsonl(required(&a.chain, "chain")?)?;
    let spec = read_model(&required(&a.model, "model")?)?;
    let burn_in = a.burn_in.unwrap_or(0.1);
    let names = spec.free_names();
    let rows = pmmh::summarize(&chain, &names, burn_in)?;
    let mut w = output(a.out.as_deref())?;
    mio::write_summary(&mut w, &rows)?;
    finish(w)?;
    let accepted = chain.iter().filter(|r| r.accepted).count();
    if let Some(p) = &a.json {
        let mut doc = SummaryDocument::new(rows);
        doc.records = Some(chain.len());
        doc.burn_in_fraction = Some(burn_in);
        doc.acceptance_rate = Some(accepted as f64 / chain.len() as f64);
        mio::write_json(p, &doc)?;
    }
    if let Some(dir) = &a.diagnostics {
        std::fs::create_dir_all(dir).map_err(mhp_core::Error::Io)?;
        let kept = &chain[pmmh::burn_in_cut(chain.len(), burn_in)..];
        let report = chain_diagnostics(kept, &names)?;
        let file = |name: &str| -> Result<Box<dyn Write>, CliError> { output(Some(&dir.join(name))) };
        let mut w = file("trace.csv")?;
        write_trace(&mut w, &chain, &names)?;
        finish(w)?;
        let mut w = file("histogram.csv")?;
        write_histograms(&mut w, kept, &names, HISTOGRAM_BINS)?;
        finish(w)?;
        let mut w = file("autocorrelation.csv")?;
        write_autocorrelation(&mut w, &report)?;
        finish(w)?;
        mio::write_json(dir.join("diagnostics.json"), &report)?;
    }
    Ok(())
}
