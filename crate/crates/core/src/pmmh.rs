//! Pseudo-marginal Metropolis-Hastings over the free parameter vector.
//!
//! Each proposal gets one fresh particle-filter estimate of its likelihood.
//! The estimate attached to the current state is kept until the state
//! moves; it is never recomputed.

use std::ops::ControlFlow;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{aggregate, AggregationGrid, IntervalCounts};
use crate::error::{Error, Result};
use crate::model::{validate, Model, ModelSpec, ParameterVector, ValidationMode};
use crate::par;
use crate::rng::{derive_seed, stream, Purpose, StreamRng};
use crate::simulate::simulate_replicates;
use crate::smc::{smc_on_model, SmcConfig};
use crate::special::{quantile_sorted, NORMAL_Q975};

/// Minimum number of post-burn-in records [`summarize`] accepts.
pub const MIN_SUMMARY_LEN: usize = 100;

/// How the jump size is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaKind {
    #[default]
    StandardDeviation,
    Variance,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "theta")]
pub enum ChainInit {
    /// See [`default_init`].
    #[default]
    Heuristic,
    Given(ParameterVector),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PmmhConfig {
    pub iterations: usize,
    pub delta: f64,
    pub delta_kind: DeltaKind,
    /// Particles per likelihood evaluation; overrides the SMC config.
    pub particles: usize,
    pub burn_in_fraction: f64,
    pub seed: u64,
    pub init: ChainInit,
    /// Random walk on log coordinates with the Jacobian correction, instead
    /// of the raw-scale walk with hard rejection.
    pub log_scale: bool,
    /// Per-coordinate multipliers of the jump size.
    pub scales: Option<Vec<f64>>,
}

impl Default for PmmhConfig {
    fn default() -> Self {
        PmmhConfig {
            iterations: 5000,
            delta: 0.12,
            delta_kind: DeltaKind::StandardDeviation,
            particles: 200,
            burn_in_fraction: 0.1,
            seed: 0,
            init: ChainInit::Heuristic,
            log_scale: false,
            scales: None,
        }
    }
}

impl PmmhConfig {
    pub fn check(&self, free_len: usize) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::InvalidInput("iterations must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidInput(format!("delta must be positive, got {}", self.delta)));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::InvalidInput(format!(
                "burn-in fraction must lie in [0, 1), got {}",
                self.burn_in_fraction
            )));
        }
        if let Some(s) = &self.scales {
            if s.len() != free_len || s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidInput(format!(
                    "scales must be {free_len} positive numbers"
                )));
            }
        }
        Ok(())
    }

    fn step_sd(&self) -> f64 {
        match self.delta_kind {
            DeltaKind::StandardDeviation => self.delta,
            DeltaKind::Variance => self.delta.sqrt(),
        }
    }
}

/// One chain iteration. `theta` is the free flat vector (see
/// [`ModelSpec::free_names`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub iteration: usize,
    pub theta: Vec<f64>,
    #[serde(with = "crate::serde_ext::float")]
    pub log_lik_hat: f64,
    pub accepted: bool,
}

/// A (possibly noisy) log-likelihood. `call` numbers the evaluations so an
/// estimator can derive a fresh seed for each one.
pub trait LogLikelihood: Sync {
    fn evaluate(&self, theta: &ParameterVector, call: u64) -> Result<f64>;
}

/// Particle-filter estimate; evaluation `c` runs with the seed derived from
/// `(seed, c)`.
#[derive(Debug, Clone)]
pub struct SmcLikelihood<'a> {
    pub spec: &'a ModelSpec,
    pub counts: &'a IntervalCounts,
    pub config: SmcConfig,
    pub seed: u64,
}

impl LogLikelihood for SmcLikelihood<'_> {
    fn evaluate(&self, theta: &ParameterVector, call: u64) -> Result<f64> {
        let model = Model::new(self.spec, theta)?;
        let mut config = self.config.clone();
        config.seed = derive_seed(self.seed, Purpose::Likelihood, &[call]);
        Ok(smc_on_model(&model, self.counts, &config)?.log_likelihood_estimate)
    }
}

/// Wraps a deterministic log-likelihood function.
pub struct ExactLikelihood<F>(pub F);

impl<F: Fn(&ParameterVector) -> Result<f64> + Sync> LogLikelihood for ExactLikelihood<F> {
    fn evaluate(&self, theta: &ParameterVector, _call: u64) -> Result<f64> {
        (self.0)(theta)
    }
}

/// Starting point: `ν_m = n_m / (2T)` (half the events taken as
/// background), η with 0.6 on the diagonal and 0.2 elsewhere, β = 1 and
/// unit gamma shape and scale. Spline baselines start flat. Tied slots take
/// the value of the first member of their group; fixed slots keep theirs.
pub fn default_init(counts: &IntervalCounts, spec: &ModelSpec) -> Result<ParameterVector> {
    let d = spec.dimension();
    if counts.dimension() != d {
        return Err(Error::InvalidInput(format!(
            "counts have {} types but the model has {d}",
            counts.dimension()
        )));
    }
    let totals = counts.totals_by_type();
    if totals.iter().all(|&n| n == 0) {
        return Err(Error::DegenerateData("every count is zero, so the initial baseline would be zero".into()));
    }
    let horizon = counts.horizon();
    let mut theta = spec.zero_parameters();
    for (m, nu) in theta.nu.iter_mut().enumerate() {
        let rate = totals[m] as f64 / (2.0 * horizon);
        nu.iter_mut().for_each(|c| *c = rate);
    }
    for m in 0..d {
        for j in 0..d {
            theta.eta[m][j] = if m == j { 0.6 } else { 0.2 };
        }
    }
    spec.from_flat(&spec.to_flat(&theta)?)
}

/// Running totals of a [`Sampler`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub iterations: usize,
    pub accepted: usize,
    /// Proposals rejected before any likelihood evaluation.
    pub out_of_domain: usize,
    /// Proposals whose estimate was −∞.
    pub degenerate: usize,
}

/// Step-at-a-time chain, for streaming output and cancellation.
pub struct Sampler<'a, L> {
    spec: &'a ModelSpec,
    likelihood: &'a L,
    config: PmmhConfig,
    state: Vec<f64>,
    log_lik: f64,
    rng: StreamRng,
    stats: ChainStats,
}

impl<'a, L: LogLikelihood> Sampler<'a, L> {
    pub fn new(spec: &'a ModelSpec, likelihood: &'a L, config: PmmhConfig, init: &ParameterVector) -> Result<Self> {
        config.check(spec.free_len())?;
        validate(spec, init, ValidationMode::FiniteHorizon)?;
        let state = spec.to_flat(init)?;
        if config.log_scale && state.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidInput(
                "the log-scale walk needs every free parameter strictly positive".into(),
            ));
        }
        let log_lik = likelihood.evaluate(init, 0)?;
        Ok(Sampler {
            spec,
            likelihood,
            rng: stream(config.seed, Purpose::Chain, &[]),
            config,
            state,
            log_lik,
            stats: ChainStats::default(),
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_lik
    }

    pub fn stats(&self) -> ChainStats {
        self.stats
    }

    /// Advances one iteration.
    pub fn step(&mut self) -> Result<ChainRecord> {
        self.stats.iterations += 1;
        let iteration = self.stats.iterations;
        let sd = self.config.step_sd();
        let mut proposal = self.state.clone();
        let mut log_jacobian = 0.0;
        for (i, x) in proposal.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            let scale = self.config.scales.as_ref().map_or(1.0, |s| s[i]);
            if self.config.log_scale {
                let next = *x * (sd * scale * z).exp();
                log_jacobian += (next / *x).ln();
                *x = next;
            } else {
                *x += sd * scale * z;
            }
        }
        let u: f64 = self.rng.random();

        let candidate = self
            .spec
            .from_flat(&proposal)
            .ok()
            .filter(|t| validate(self.spec, t, ValidationMode::FiniteHorizon).is_ok());
        let accepted = match candidate {
            None => {
                self.stats.out_of_domain += 1;
                false
            }
            Some(theta) => {
                let ll = self.likelihood.evaluate(&theta, iteration as u64)?;
                if ll == f64::NEG_INFINITY || ll.is_nan() {
                    self.stats.degenerate += 1;
                    false
                } else {
                    let accept = self.log_lik == f64::NEG_INFINITY || u.ln() < ll - self.log_lik + log_jacobian;
                    if accept {
                        self.state = proposal;
                        self.log_lik = ll;
                    }
                    accept
                }
            }
        };
        if accepted {
            self.stats.accepted += 1;
        }
        Ok(ChainRecord {
            iteration,
            theta: self.state.clone(),
            log_lik_hat: self.log_lik,
            accepted,
        })
    }

    /// Runs the remaining iterations, handing each record to `sink`; stops
    /// early when `sink` breaks.
    pub fn run<F>(&mut self, mut sink: F) -> Result<ChainStats>
    where
        F: FnMut(&ChainRecord) -> ControlFlow<()>,
    {
        while self.stats.iterations < self.config.iterations {
            let record = self.step()?;
            if sink(&record).is_break() {
                break;
            }
        }
        Ok(self.stats)
    }
}

fn resolve_init(counts: &IntervalCounts, spec: &ModelSpec, config: &PmmhConfig) -> Result<ParameterVector> {
    match &config.init {
        ChainInit::Heuristic => default_init(counts, spec),
        ChainInit::Given(theta) => Ok(theta.clone()),
    }
}

/// Runs the whole chain with the particle-filter likelihood. The particle
/// count comes from `pmmh`; every other filter setting from `smc` (its seed
/// is unused, evaluation seeds derive from `pmmh.seed`).
pub fn run_chain(
    spec: &ModelSpec,
    counts: &IntervalCounts,
    smc: &SmcConfig,
    pmmh: &PmmhConfig,
) -> Result<Vec<ChainRecord>> {
    let mut out = Vec::with_capacity(pmmh.iterations);
    run_chain_streaming(spec, counts, smc, pmmh, |r| {
        out.push(r.clone());
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

pub fn run_chain_streaming<F>(
    spec: &ModelSpec,
    counts: &IntervalCounts,
    smc: &SmcConfig,
    pmmh: &PmmhConfig,
    sink: F,
) -> Result<ChainStats>
where
    F: FnMut(&ChainRecord) -> ControlFlow<()>,
{
    let init = resolve_init(counts, spec, pmmh)?;
    let mut config = smc.clone();
    config.particles = pmmh.particles;
    config.check()?;
    let likelihood = SmcLikelihood {
        spec,
        counts,
        config,
        seed: pmmh.seed,
    };
    let mut sampler = Sampler::new(spec, &likelihood, pmmh.clone(), &init)?;
    sampler.run(sink)
}

/// `count` independent chains in parallel, chain `c` seeded from
/// `(pmmh.seed, c)`.
pub fn run_independent_chains(
    spec: &ModelSpec,
    counts: &IntervalCounts,
    smc: &SmcConfig,
    pmmh: &PmmhConfig,
    count: usize,
) -> Result<Vec<Vec<ChainRecord>>> {
    par::map_indices(count, |c| {
        let mut cfg = pmmh.clone();
        cfg.seed = derive_seed(pmmh.seed, Purpose::Chain, &[c as u64]);
        run_chain(spec, counts, smc, &cfg)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub parameter: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Median, 2.5% and 97.5% quantiles (type 7) and the interval width over
/// `2 · 1.959964` as standard error.
pub fn summarize_sample(name: &str, sample: &[f64]) -> ParameterSummary {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let ci_low = quantile_sorted(&sorted, 0.025);
    let ci_high = quantile_sorted(&sorted, 0.975);
    ParameterSummary {
        parameter: name.to_string(),
        estimate: quantile_sorted(&sorted, 0.5),
        se: (ci_high - ci_low) / (2.0 * NORMAL_Q975),
        ci_low,
        ci_high,
    }
}

/// Index of the first record kept after dropping `floor(len · fraction)`.
pub fn burn_in_cut(len: usize, burn_in_fraction: f64) -> usize {
    (len as f64 * burn_in_fraction).floor() as usize
}

/// Per-parameter summary of the chain after burn-in.
pub fn summarize(chain: &[ChainRecord], names: &[String], burn_in_fraction: f64) -> Result<Vec<ParameterSummary>> {
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(Error::InvalidInput(format!(
            "burn-in fraction must lie in [0, 1), got {burn_in_fraction}"
        )));
    }
    let kept = &chain[burn_in_cut(chain.len(), burn_in_fraction)..];
    if kept.len() < MIN_SUMMARY_LEN {
        return Err(Error::ChainTooShort {
            len: kept.len(),
            min: MIN_SUMMARY_LEN,
        });
    }
    let p = kept[0].theta.len();
    if names.len() != p {
        return Err(Error::InvalidInput(format!("{} names for {p} parameters", names.len())));
    }
    Ok((0..p)
        .map(|i| {
            let column: Vec<f64> = kept.iter().map(|r| r.theta[i]).collect();
            summarize_sample(&names[i], &column)
        })
        .collect())
}

/// Pointwise quantile bands of cumulative counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    /// Right ends `t_1..t_I` of the windows.
    pub times: Vec<f64>,
    pub quantiles: Vec<f64>,
    /// `bands[m][q][i]`: quantile `q` of `N_m(0, t_{i+1}]`.
    pub bands: Vec<Vec<Vec<f64>>>,
}

/// Simulates `replicates` paths from `theta`, aggregates them on `grid` and
/// returns pointwise quantiles of the cumulative counts per type.
pub fn posterior_predictive_envelope(
    theta: &ParameterVector,
    spec: &ModelSpec,
    grid: &AggregationGrid,
    replicates: usize,
    quantiles: &[f64],
    seed: u64,
) -> Result<Envelope> {
    if replicates == 0 {
        return Err(Error::InvalidInput("at least one replicate is required".into()));
    }
    if quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(Error::InvalidInput("quantiles must lie in [0, 1]".into()));
    }
    let d = spec.dimension();
    let paths = simulate_replicates(spec, theta, grid.horizon(), seed, replicates)?;
    let intervals = grid.intervals();
    // cumulative[m][i][r]
    let mut cumulative = vec![vec![vec![0.0; replicates]; intervals]; d];
    for (r, path) in paths.iter().enumerate() {
        let counts = aggregate(path, grid, d)?;
        let mut running = vec![0u64; d];
        for (i, row) in counts.rows().iter().enumerate() {
            for m in 0..d {
                running[m] += row[m];
                cumulative[m][i][r] = running[m] as f64;
            }
        }
    }
    let bands = cumulative
        .into_iter()
        .map(|per_type| {
            let sorted: Vec<Vec<f64>> = per_type
                .into_iter()
                .map(|mut v| {
                    v.sort_by(f64::total_cmp);
                    v
                })
                .collect();
            quantiles
                .iter()
                .map(|&q| sorted.iter().map(|v| quantile_sorted(v, q)).collect())
                .collect()
        })
        .collect();
    Ok(Envelope {
        times: grid.boundaries()[1..].to_vec(),
        quantiles: quantiles.to_vec(),
        bands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{reference_model, KernelFamily};
    use crate::simulate::simulate_path;
    use crate::smc::poisson_log_likelihood;

    fn poisson_counts(seed: u64) -> (ModelSpec, IntervalCounts) {
        let spec = ModelSpec::uniform(1, KernelFamily::Exponential).unwrap();
        let truth = ParameterVector::exponential(&[2.0], vec![vec![0.0]], vec![vec![1.0]]);
        let path = simulate_path(&spec, &truth, 40.0, seed).unwrap();
        let counts = aggregate(&path, &AggregationGrid::uniform(40.0, 1.0).unwrap(), 1).unwrap();
        (spec, counts)
    }

    #[test]
    fn heuristic_init() {
        let spec = ModelSpec::uniform(2, KernelFamily::Exponential).unwrap();
        let grid = AggregationGrid::uniform(100.0, 50.0).unwrap();
        let counts = IntervalCounts::new(grid.clone(), vec![vec![60, 150], vec![40, 50]]).unwrap();
        let init = default_init(&counts, &spec).unwrap();
        assert_eq!(init.nu, vec![vec![0.5], vec![1.0]]);
        assert_eq!(init.eta, vec![vec![0.6, 0.2], vec![0.2, 0.6]]);
        let zero = IntervalCounts::new(grid, vec![vec![0, 0], vec![0, 0]]).unwrap();
        assert!(matches!(default_init(&zero, &spec), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn heuristic_init_respects_ties() {
        let (spec, _) = reference_model();
        let grid = AggregationGrid::uniform(10.0, 1.0).unwrap();
        let counts = IntervalCounts::new(grid, vec![vec![3, 1]; 10]).unwrap();
        let init = default_init(&counts, &spec).unwrap();
        validate(&spec, &init, ValidationMode::FiniteHorizon).unwrap();
    }

    #[test]
    fn chain_is_reproducible_and_keeps_stored_estimate() {
        let (spec, theta) = reference_model();
        let path = simulate_path(&spec, &theta, 20.0, 1).unwrap();
        let counts = aggregate(&path, &AggregationGrid::uniform(20.0, 1.0).unwrap(), 2).unwrap();
        let cfg = PmmhConfig {
            iterations: 60,
            particles: 20,
            seed: 4,
            init: ChainInit::Given(theta.clone()),
            ..Default::default()
        };
        let a = run_chain(&spec, &counts, &SmcConfig::default(), &cfg).unwrap();
        let b = run_chain(&spec, &counts, &SmcConfig::default(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 60);
        for w in a.windows(2) {
            if !w[1].accepted {
                assert_eq!(w[0].theta, w[1].theta);
                assert_eq!(w[0].log_lik_hat.to_bits(), w[1].log_lik_hat.to_bits());
            }
        }
        // tied β slots stay tied: the free vector has one slot per group
        assert!(a.iter().all(|r| r.theta.len() == spec.free_len()));
    }

    #[test]
    fn streaming_stops_on_break() {
        let (spec, counts) = poisson_counts(2);
        let cfg = PmmhConfig {
            iterations: 1000,
            particles: 4,
            ..Default::default()
        };
        let mut seen = 0;
        let stats = run_chain_streaming(&spec, &counts, &SmcConfig::default(), &cfg, |_| {
            seen += 1;
            if seen == 10 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .unwrap();
        assert_eq!(stats.iterations, 10);
    }

    fn fixed_poisson_spec() -> ModelSpec {
        ModelSpec::uniform(1, KernelFamily::Exponential)
            .unwrap()
            .with_fixed(vec![(1, 0.0), (2, 1.0)])
            .unwrap()
    }

    #[test]
    fn pseudo_marginal_equals_exact_mh_when_estimator_is_exact() {
        let (_, counts) = poisson_counts(3);
        let spec = fixed_poisson_spec();
        let init = spec.from_flat(&[1.5]).unwrap();
        let cfg = PmmhConfig {
            iterations: 500,
            particles: 8,
            seed: 11,
            init: ChainInit::Given(init),
            ..Default::default()
        };
        let pm = run_chain(&spec, &counts, &SmcConfig::default(), &cfg).unwrap();

        let exact = ExactLikelihood(|t: &ParameterVector| Ok(poisson_log_likelihood(&Model::new(&spec, t)?, &counts)));
        let mut sampler = Sampler::new(&spec, &exact, cfg.clone(), &spec.from_flat(&[1.5]).unwrap()).unwrap();
        let mut mh = Vec::new();
        sampler
            .run(|r| {
                mh.push(r.clone());
                ControlFlow::Continue(())
            })
            .unwrap();
        let flags = |c: &[ChainRecord]| c.iter().map(|r| r.accepted).collect::<Vec<_>>();
        assert_eq!(flags(&pm), flags(&mh));
        for (a, b) in pm.iter().zip(&mh) {
            assert_eq!(a.theta, b.theta);
            assert!((a.log_lik_hat - b.log_lik_hat).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_limit_chain_matches_gamma_posterior() {
        // flat prior: ν | data ~ Gamma(N + 1, rate T)
        let (_, counts) = poisson_counts(5);
        let spec = fixed_poisson_spec();
        let n: u64 = counts.totals_by_type()[0];
        let horizon = counts.horizon();
        let cfg = PmmhConfig {
            iterations: 40_000,
            particles: 2,
            delta: 0.4,
            seed: 1,
            init: ChainInit::Given(spec.from_flat(&[n as f64 / horizon]).unwrap()),
            ..Default::default()
        };
        let chain = run_chain(&spec, &counts, &SmcConfig::default(), &cfg).unwrap();
        let s = summarize(&chain, &spec.free_names(), 0.1).unwrap();
        let law = statrs::distribution::Gamma::new(n as f64 + 1.0, horizon).unwrap();
        use statrs::distribution::ContinuousCDF;
        let sd = (n as f64 + 1.0).sqrt() / horizon;
        for (got, p) in [(s[0].ci_low, 0.025), (s[0].estimate, 0.5), (s[0].ci_high, 0.975)] {
            let want = law.inverse_cdf(p);
            assert!((got - want).abs() < 0.1 * sd, "p={p}: {got} vs {want}");
        }
    }

    #[test]
    fn summary_of_constant_chain() {
        let chain: Vec<ChainRecord> = (0..200)
            .map(|i| ChainRecord {
                iteration: i + 1,
                theta: vec![3.5],
                log_lik_hat: -1.0,
                accepted: false,
            })
            .collect();
        let s = summarize(&chain, &["x".into()], 0.1).unwrap();
        assert_eq!(s[0].estimate, 3.5);
        assert_eq!(s[0].se, 0.0);
        assert!(matches!(
            summarize(&chain[..100], &["x".into()], 0.1),
            Err(Error::ChainTooShort { len: 90, .. })
        ));
    }

    #[test]
    fn summary_quantile_convention() {
        let sample: Vec<f64> = (0..=100).map(f64::from).collect();
        let s = summarize_sample("x", &sample);
        assert_eq!(s.estimate, 50.0);
        assert!((s.ci_low - 2.5).abs() < 1e-12);
        assert!((s.ci_high - 97.5).abs() < 1e-12);
        assert!((s.se - 95.0 / (2.0 * 1.959964)).abs() < 1e-12);
    }

    #[test]
    fn envelope_is_deterministic_and_ordered() {
        let (spec, theta) = reference_model();
        let grid = AggregationGrid::uniform(10.0, 1.0).unwrap();
        let a = posterior_predictive_envelope(&theta, &spec, &grid, 50, &[0.025, 0.5, 0.975], 1).unwrap();
        let b = posterior_predictive_envelope(&theta, &spec, &grid, 50, &[0.025, 0.5, 0.975], 1).unwrap();
        assert_eq!(a, b);
        for per_type in &a.bands {
            for i in 0..10 {
                assert!(per_type[0][i] <= per_type[1][i] && per_type[1][i] <= per_type[2][i]);
            }
            assert!(per_type[1].windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn config_checks() {
        let mut cfg = PmmhConfig::default();
        assert!(cfg.check(3).is_ok());
        cfg.delta = 0.0;
        assert!(cfg.check(3).is_err());
        cfg.delta = 0.1;
        cfg.burn_in_fraction = 1.0;
        assert!(cfg.check(3).is_err());
        cfg.burn_in_fraction = 0.1;
        cfg.scales = Some(vec![1.0, 2.0]);
        assert!(cfg.check(3).is_err());
    }

    #[test]
    fn record_json_round_trip() {
        let r = ChainRecord {
            iteration: 7,
            theta: vec![0.1, 1.0 / 3.0, 2.5e-8],
            log_lik_hat: -123.456789012345,
            accepted: true,
        };
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<ChainRecord>(&s).unwrap(), r);
    }
}
