//! Browser bindings for the demo page in `www/`.
//!
//! Every entry point takes and returns JSON strings. The `*_json` functions
//! hold the logic and run natively in tests; the exported wrappers only
//! convert errors into JavaScript exceptions.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use mhp_core::exact::mle_fit;
use mhp_core::model::{validate, ValidationMode};
use mhp_core::rng::{derive_seed, Purpose};
use mhp_core::simulate::simulate_path;
use mhp_core::smc::{smc_log_likelihood, Proposal, SmcConfig};
use mhp_core::{aggregate, AggregationGrid, EventSequence, IntervalCounts, Model, ModelSpec, ParameterVector};

/// Intensity samples per unit of time, capped for long horizons.
const CURVE_DENSITY: f64 = 100.0;
const CURVE_MAX_POINTS: usize = 4000;

type Res<T> = Result<T, String>;

fn parse<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> Res<T> {
    serde_json::from_str(text).map_err(|e| format!("{what}: {e}"))
}

fn to_json<T: Serialize>(value: &T) -> Res<String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn core<T>(r: mhp_core::Result<T>) -> Res<T> {
    r.map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Curve {
    t: Vec<f64>,
    /// `values[m][k]` is `λ_m(t[k])`.
    values: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct Simulation {
    events: EventSequence,
    counts: IntervalCounts,
    intensity: Curve,
}

fn intensity_curve(model: &Model, path: &EventSequence) -> Curve {
    let horizon = path.horizon();
    let n = ((horizon * CURVE_DENSITY) as usize).clamp(200, CURVE_MAX_POINTS);
    let mut t: Vec<f64> = (0..=n).map(|k| horizon * k as f64 / n as f64).collect();
    // just after each event, so the jumps are drawn
    t.extend(path.times().iter().map(|&s| (s * (1.0 + 1e-12)).min(horizon)));
    t.sort_by(f64::total_cmp);
    let values = (0..model.dimension())
        .map(|m| t.iter().map(|&s| model.intensity(path, m, s)).collect())
        .collect();
    Curve { t, values }
}

pub fn simulate_json(model: &str, theta: &str, horizon: f64, width: f64, seed: u32) -> Res<String> {
    let spec: ModelSpec = parse("model", model)?;
    let theta: ParameterVector = parse("theta", theta)?;
    let path = core(simulate_path(&spec, &theta, horizon, seed as u64))?;
    let grid = core(AggregationGrid::uniform(horizon, width))?;
    let counts = core(aggregate(&path, &grid, spec.dimension()))?;
    let m = core(Model::new(&spec, &theta))?;
    let intensity = intensity_curve(&m, &path);
    to_json(&Simulation {
        events: path,
        counts,
        intensity,
    })
}

#[derive(Serialize)]
struct Spread {
    particles: usize,
    uniform: Vec<f64>,
    poisson: Vec<f64>,
    uniform_variance: f64,
    poisson_variance: f64,
}

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)
}

/// `reps` log-likelihood estimates under each proposal. Degenerate runs
/// (every particle lost) are dropped from the lists.
pub fn proposal_spread_json(model: &str, theta: &str, counts: &str, particles: usize, reps: usize, seed: u32) -> Res<String> {
    let spec: ModelSpec = parse("model", model)?;
    let theta: ParameterVector = parse("theta", theta)?;
    let counts: IntervalCounts = parse("counts", counts)?;
    core(validate(&spec, &theta, ValidationMode::FiniteHorizon))?;
    let run = |proposal: Proposal, arm: u64| -> Res<Vec<f64>> {
        let mut out = Vec::with_capacity(reps);
        for r in 0..reps {
            let cfg = SmcConfig::new(particles, derive_seed(seed as u64, Purpose::Replicate, &[arm, r as u64]))
                .with_proposal(proposal);
            let res = core(smc_log_likelihood(&spec, &theta, &counts, &cfg))?;
            if !res.degenerate {
                out.push(res.log_likelihood_estimate);
            }
        }
        Ok(out)
    };
    let uniform = run(Proposal::OrderedUniform, 0)?;
    let poisson = run(Proposal::PoissonRate95, 1)?;
    to_json(&Spread {
        particles,
        uniform_variance: variance(&uniform),
        poisson_variance: variance(&poisson),
        uniform,
        poisson,
    })
}

#[derive(Serialize)]
struct FitRow {
    parameter: String,
    truth: f64,
    estimate: f64,
    se: f64,
}

#[derive(Serialize)]
struct FitTable {
    log_likelihood: f64,
    converged: bool,
    rows: Vec<FitRow>,
}

/// Maximum likelihood fit to the simulated event times, started from and
/// compared with `theta`.
pub fn fit_exact_json(model: &str, theta: &str, events: &str) -> Res<String> {
    let spec: ModelSpec = parse("model", model)?;
    let theta: ParameterVector = parse("theta", theta)?;
    let events: EventSequence = parse("events", events)?;
    let truth = core(spec.to_flat(&theta))?;
    let fit = core(mle_fit(&spec, &events, &theta))?;
    let rows = fit
        .names
        .iter()
        .zip(&truth)
        .zip(fit.estimate.iter().zip(&fit.standard_errors))
        .map(|((name, &truth), (&estimate, &se))| FitRow {
            parameter: name.clone(),
            truth,
            estimate,
            se,
        })
        .collect();
    to_json(&FitTable {
        log_likelihood: fit.log_likelihood,
        converged: fit.converged,
        rows,
    })
}

fn js<T>(r: Res<T>) -> Result<T, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate(model: &str, theta: &str, horizon: f64, width: f64, seed: u32) -> Result<String, JsValue> {
    js(simulate_json(model, theta, horizon, width, seed))
}

#[wasm_bindgen(js_name = proposalSpread)]
pub fn proposal_spread(model: &str, theta: &str, counts: &str, particles: usize, reps: usize, seed: u32) -> Result<String, JsValue> {
    js(proposal_spread_json(model, theta, counts, particles, reps, seed))
}

#[wasm_bindgen(js_name = fitExact)]
pub fn fit_exact(model: &str, theta: &str, events: &str) -> Result<String, JsValue> {
    js(fit_exact_json(model, theta, events))
}
