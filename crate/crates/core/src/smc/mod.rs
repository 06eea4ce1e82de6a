//! Guided particle filter for interval count data.
//!
//! In each window the particles impute event times and types that agree
//! exactly with the observed counts, so no proposal contradicts the data.
//! The product over windows of the mean incremental weights is an unbiased
//! estimate of the likelihood; its logarithm is returned.
//!
//! The final weighted cloud is available through [`run_filter`]. With the
//! ordered uniform proposal it targets the filtering law of the latent
//! events given the counts so far. It says nothing useful about the
//! predictive law, since proposals never look past the current window.

mod history;
mod proposal;
mod resample;

pub use history::{EpsilonHistory, FullHistory, ParticleHistory};
pub use proposal::{
    propose_times_poisson, propose_times_poisson_into, propose_times_uniform, propose_times_uniform_into,
    propose_types, propose_types_into,
};
pub use resample::{effective_sample_size, normalized_weights, resample_indices};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::data::IntervalCounts;
use crate::error::{Error, Result};
use crate::model::{validate, Model, ModelSpec, ParameterVector, ValidationMode};
use crate::par;
use crate::rng::{stream, Purpose};
use crate::special::{gamma_quantile, ln_factorial, log_sum_exp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposal {
    /// Order statistics of uniforms on the window.
    #[default]
    OrderedUniform,
    /// Poisson arrivals whose rate puts all `n*` events in the window with
    /// probability 0.95.
    PoissonRate95,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scheme")]
pub enum Resampling {
    #[default]
    EveryStep,
    /// Resample only when ESS drops below `fraction · J`.
    EssThreshold { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryMode {
    /// ε-matrix state when every kernel is exponential, full history otherwise.
    #[default]
    Auto,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmcConfig {
    pub particles: usize,
    pub proposal: Proposal,
    pub resampling: Resampling,
    pub history: HistoryMode,
    pub seed: u64,
}

impl Default for SmcConfig {
    fn default() -> Self {
        SmcConfig {
            particles: 200,
            proposal: Proposal::OrderedUniform,
            resampling: Resampling::EveryStep,
            history: HistoryMode::Auto,
            seed: 0,
        }
    }
}

impl SmcConfig {
    pub fn new(particles: usize, seed: u64) -> Self {
        SmcConfig {
            particles,
            seed,
            ..Default::default()
        }
    }

    pub fn with_proposal(mut self, proposal: Proposal) -> Self {
        self.proposal = proposal;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::InvalidInput(format!(
                "particle count must be at least 2, got {}",
                self.particles
            )));
        }
        if let Resampling::EssThreshold { fraction } = self.resampling {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "ESS threshold must lie in (0, 1], got {fraction}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmcResult {
    #[serde(with = "crate::serde_ext::float")]
    pub log_likelihood_estimate: f64,
    #[serde(with = "crate::serde_ext::floats")]
    pub per_interval_log_factors: Vec<f64>,
    pub ess_trace: Vec<f64>,
    pub degenerate: bool,
}

/// Quantities shared by every particle in one window.
#[derive(Debug, Clone)]
pub struct Window<'a> {
    pub t_prev: f64,
    pub t_cur: f64,
    pub counts: &'a [u64],
    pub proposal: Proposal,
    n: usize,
    rate: f64,
    log_const: f64,
}

impl<'a> Window<'a> {
    /// `rate` is the Poisson proposal rate; ignored for the uniform proposal.
    fn with_rate(model: &Model, t_prev: f64, t_cur: f64, counts: &'a [u64], proposal: Proposal, rate: f64) -> Self {
        let n: u64 = counts.iter().sum();
        let arrangements: f64 = counts.iter().map(|&c| ln_factorial(c)).sum();
        let baseline = model.total_baseline_integral(t_prev, t_cur);
        let nf = n as f64;
        let log_const = match proposal {
            Proposal::OrderedUniform => nf * (t_cur - t_prev).ln() - arrangements - baseline,
            Proposal::PoissonRate95 if n > 0 => -nf * rate.ln() + ln_factorial(n) - arrangements - baseline,
            Proposal::PoissonRate95 => -baseline,
        };
        Window {
            t_prev,
            t_cur,
            counts,
            proposal,
            n: n as usize,
            rate,
            log_const,
        }
    }

    pub fn new(model: &Model, t_prev: f64, t_cur: f64, counts: &'a [u64], proposal: Proposal) -> Self {
        let n: u64 = counts.iter().sum();
        let rate = poisson_rate(n, t_cur - t_prev);
        Self::with_rate(model, t_prev, t_cur, counts, proposal, rate)
    }

    pub fn event_count(&self) -> usize {
        self.n
    }

    /// Proposal rate for [`Proposal::PoissonRate95`].
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Draws times and types into the buffers.
    pub fn propose<R: rand::Rng + ?Sized>(
        &self,
        rng: &mut R,
        times: &mut SmallVec<[f64; 32]>,
        types: &mut SmallVec<[usize; 32]>,
    ) {
        times.clear();
        if self.n == 0 {
            types.clear();
            return;
        }
        propose_types_into(self.counts, rng, types);
        match self.proposal {
            Proposal::OrderedUniform => propose_times_uniform_into(self.t_prev, self.t_cur, self.n, rng, times),
            Proposal::PoissonRate95 => propose_times_poisson_into(self.t_prev, self.rate, self.n, rng, times),
        }
    }

    /// Extends `history` with the proposal and returns its log weight.
    /// Zero-probability proposals give −∞ and leave `history` untouched.
    pub fn log_weight<H: ParticleHistory>(&self, history: &mut H, model: &Model, times: &[f64], types: &[usize]) -> f64 {
        let mut extra = 0.0;
        if self.proposal == Proposal::PoissonRate95 && self.n > 0 {
            let last = times[self.n - 1];
            if last > self.t_cur {
                return f64::NEG_INFINITY;
            }
            extra = self.rate * (last - self.t_prev);
        }
        let lw = history.extend(model, self.t_prev, self.t_cur, times, types) + self.log_const + extra;
        if lw.is_nan() {
            f64::NEG_INFINITY
        } else {
            lw
        }
    }
}

/// `γ_{0.95; n, 1} / width`.
pub fn poisson_rate(n: u64, width: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    gamma_quantile(n as f64, 0.95) / width
}

/// Log weight of one proposed window for one particle; see [`Window`].
#[allow(clippy::too_many_arguments)]
pub fn interval_log_weight<H: ParticleHistory>(
    history: &mut H,
    model: &Model,
    t_prev: f64,
    t_cur: f64,
    times: &[f64],
    types: &[usize],
    counts_row: &[u64],
    proposal: Proposal,
) -> f64 {
    Window::new(model, t_prev, t_cur, counts_row, proposal).log_weight(history, model, times, types)
}

#[derive(Debug, Clone)]
struct Particle<H> {
    history: H,
    log_weight: f64,
    increment: f64,
}

/// Result plus the final weighted particle cloud.
#[derive(Debug, Clone)]
pub struct FilterOutput<H> {
    pub result: SmcResult,
    pub histories: Vec<H>,
    /// Normalized log weights of `histories`.
    pub log_weights: Vec<f64>,
}

/// Runs the filter from `init` for every particle.
pub fn run_filter<H: ParticleHistory>(
    model: &Model,
    counts: &IntervalCounts,
    config: &SmcConfig,
    init: H,
) -> Result<FilterOutput<H>> {
    config.check()?;
    if counts.dimension() != model.dimension() {
        return Err(Error::InvalidInput(format!(
            "counts have {} types but the model has {}",
            counts.dimension(),
            model.dimension()
        )));
    }
    let j = config.particles;
    let uniform = -(j as f64).ln();
    let mut particles: Vec<Particle<H>> = (0..j)
        .map(|_| Particle {
            history: init.clone(),
            log_weight: uniform,
            increment: 0.0,
        })
        .collect();
    let bounds = counts.boundaries();
    let intervals = counts.intervals();
    let mut rates: HashMap<(u64, u64), f64> = HashMap::new();
    let mut factors = Vec::with_capacity(intervals);
    let mut ess_trace = Vec::with_capacity(intervals);
    let mut degenerate = false;
    let mut terms = vec![0.0; j];

    for (i, row) in counts.rows().iter().enumerate() {
        let (t_prev, t_cur) = (bounds[i], bounds[i + 1]);
        if i > 0 {
            let resample = match config.resampling {
                Resampling::EveryStep => true,
                Resampling::EssThreshold { fraction } => ess_trace[i - 1] < fraction * j as f64,
            };
            if resample {
                let lw: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
                let mut rng = stream(config.seed, Purpose::Resample, &[i as u64]);
                let ancestors = resample_indices(&lw, j, &mut rng)?;
                particles = ancestors
                    .iter()
                    .map(|&a| Particle {
                        history: particles[a].history.clone(),
                        log_weight: uniform,
                        increment: 0.0,
                    })
                    .collect();
            }
        }
        let n: u64 = row.iter().sum();
        let width = t_cur - t_prev;
        let rate = if config.proposal == Proposal::PoissonRate95 {
            *rates
                .entry((n, width.to_bits()))
                .or_insert_with(|| poisson_rate(n, width))
        } else {
            0.0
        };
        let window = Window::with_rate(model, t_prev, t_cur, row, config.proposal, rate);
        par::for_each_indexed(&mut particles, |k, p| {
            if p.log_weight == f64::NEG_INFINITY {
                p.increment = f64::NEG_INFINITY;
                return;
            }
            let mut rng = stream(config.seed, Purpose::Propagate, &[i as u64, k as u64]);
            let mut times = SmallVec::new();
            let mut types = SmallVec::new();
            window.propose(&mut rng, &mut times, &mut types);
            p.increment = window.log_weight(&mut p.history, model, &times, &types);
        });
        for (t, p) in terms.iter_mut().zip(&particles) {
            *t = p.log_weight + p.increment;
        }
        let factor = log_sum_exp(&terms);
        factors.push(factor);
        if !factor.is_finite() {
            degenerate = true;
            ess_trace.push(0.0);
            break;
        }
        let mut sum_sq = 0.0;
        for (p, &t) in particles.iter_mut().zip(&terms) {
            p.log_weight = t - factor;
            sum_sq += (2.0 * p.log_weight).exp();
        }
        ess_trace.push((1.0 / sum_sq).clamp(1.0, j as f64));
    }

    let log_likelihood_estimate = if degenerate {
        f64::NEG_INFINITY
    } else {
        factors.iter().sum()
    };
    let (histories, log_weights) = particles.into_iter().map(|p| (p.history, p.log_weight)).unzip();
    Ok(FilterOutput {
        result: SmcResult {
            log_likelihood_estimate,
            per_interval_log_factors: factors,
            ess_trace,
            degenerate,
        },
        histories,
        log_weights,
    })
}

/// Runs the filter on a compiled model, choosing the history representation
/// from `config.history`.
pub fn smc_on_model(model: &Model, counts: &IntervalCounts, config: &SmcConfig) -> Result<SmcResult> {
    if model.all_exponential() && config.history == HistoryMode::Auto {
        Ok(run_filter(model, counts, config, EpsilonHistory::new(model.dimension()))?.result)
    } else {
        Ok(run_filter(model, counts, config, FullHistory::new())?.result)
    }
}

/// Unbiased SMC estimate of the log-likelihood of `counts` under `theta`.
/// An interval in which every particle dies is reported through
/// [`SmcResult::degenerate`] with an estimate of −∞, not as an error.
pub fn smc_log_likelihood(
    spec: &ModelSpec,
    theta: &ParameterVector,
    counts: &IntervalCounts,
    config: &SmcConfig,
) -> Result<SmcResult> {
    validate(spec, theta, ValidationMode::FiniteHorizon)?;
    let model = Model::new(spec, theta)?;
    smc_on_model(&model, counts, config)
}

/// Exact log-likelihood for a model without excitation: a product of
/// independent Poisson probabilities.
pub fn poisson_log_likelihood(model: &Model, counts: &IntervalCounts) -> f64 {
    let b = counts.boundaries();
    let mut total = 0.0;
    for (i, row) in counts.rows().iter().enumerate() {
        for (m, &n) in row.iter().enumerate() {
            let mu = model.baseline(m).integral(b[i], b[i + 1]);
            total += if n == 0 {
                -mu
            } else {
                n as f64 * mu.ln() - mu - ln_factorial(n)
            };
        }
    }
    total
}
