//! Distributional checks against closed forms. Each one is seeded, so a
//! failure reproduces exactly.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

use mhp_core::exact::mle_fit;
use mhp_core::model::{stationary_mean_rates, KernelFamily};
use mhp_core::pmmh::{posterior_predictive_envelope, run_chain, ChainInit, PmmhConfig};
use mhp_core::simulate::simulate_replicates;
use mhp_core::smc::SmcConfig;
use mhp_core::{aggregate, AggregationGrid, ModelSpec, ParameterVector};

fn reference() -> (ModelSpec, ParameterVector) {
    let spec = ModelSpec::uniform(2, KernelFamily::Exponential)
        .unwrap()
        .with_row_tied_kernels()
        .unwrap();
    let theta = ParameterVector::exponential(
        &[0.8, 1.0],
        vec![vec![0.6, 0.3], vec![0.25, 0.5]],
        vec![vec![0.5, 0.5], vec![0.75, 0.75]],
    );
    (spec, theta)
}

fn poisson_only(nu: &[f64]) -> (ModelSpec, ParameterVector) {
    let d = nu.len();
    let spec = ModelSpec::uniform(d, KernelFamily::Exponential).unwrap();
    let theta = ParameterVector::exponential(nu, vec![vec![0.0; d]; d], vec![vec![1.0; d]; d]);
    (spec, theta)
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[test]
fn unexcited_counts_are_poisson() {
    let (spec, theta) = poisson_only(&[0.8, 1.0]);
    let horizon = 10.0;
    let paths = simulate_replicates(&spec, &theta, horizon, 11, 10_000).unwrap();
    for (m, nu) in [0.8, 1.0].into_iter().enumerate() {
        let law = Poisson::new(nu * horizon).unwrap();
        let counts: Vec<u64> = paths.iter().map(|p| p.count_by_type(2)[m]).collect();
        // cells 0..=lo and hi.. are pooled so every expected count is large
        let (lo, hi) = (3u64, 16u64);
        let n = counts.len() as f64;
        let mut observed = vec![0.0; (hi - lo + 1) as usize];
        for &c in &counts {
            observed[(c.clamp(lo, hi) - lo) as usize] += 1.0;
        }
        let mut expected: Vec<f64> = (lo..=hi).map(|k| n * law.pmf(k)).collect();
        expected[0] = n * law.cdf(lo);
        *expected.last_mut().unwrap() = n * (1.0 - law.cdf(hi - 1));
        let stat: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e).powi(2) / e).sum();
        let p = 1.0 - ChiSquared::new((observed.len() - 1) as f64).unwrap().cdf(stat);
        assert!(p > 0.01, "type {m}: chi2 {stat}, p {p}");
    }
}

#[test]
fn reference_model_event_volume() {
    let (spec, theta) = reference();
    let totals: Vec<f64> = simulate_replicates(&spec, &theta, 200.0, 12, 200)
        .unwrap()
        .iter()
        .map(|p| p.len() as f64)
        .collect();
    let (mean, _) = mean_sd(&totals);
    assert!((mean - 2000.0).abs() <= 100.0, "mean total {mean}");
}

#[test]
fn long_run_rates_match_stationary_means() {
    let (spec, theta) = reference();
    let target = stationary_mean_rates(&spec, &theta).unwrap();
    assert!((target[0] - 5.6).abs() < 1e-12 && (target[1] - 4.8).abs() < 1e-12);
    let horizon = 1e4;
    let paths = simulate_replicates(&spec, &theta, horizon, 13, 20).unwrap();
    for m in 0..2 {
        let rates: Vec<f64> = paths.iter().map(|p| p.count_by_type(2)[m] as f64 / horizon).collect();
        let (mean, sd) = mean_sd(&rates);
        let se = sd / (rates.len() as f64).sqrt();
        assert!((mean - target[m]).abs() <= 3.0 * se, "type {m}: {mean} vs {} (se {se})", target[m]);
    }
}

#[test]
fn exact_time_estimator_is_centred_on_the_truth() {
    let (spec, theta) = reference();
    let truth = spec.to_flat(&theta).unwrap();
    let paths = simulate_replicates(&spec, &theta, 200.0, 14, 50).unwrap();
    let estimates: Vec<Vec<f64>> = paths
        .iter()
        .map(|p| mle_fit(&spec, p, &theta).unwrap().estimate)
        .collect();
    let names = spec.free_names();
    for (k, name) in names.iter().enumerate() {
        let column: Vec<f64> = estimates.iter().map(|e| e[k]).collect();
        let (mean, sd) = mean_sd(&column);
        let se = sd / (column.len() as f64).sqrt();
        assert!((mean - truth[k]).abs() <= 3.0 * se, "{name}: mean {mean}, truth {}, se {se}", truth[k]);
    }
}

#[test]
fn envelope_covers_fresh_paths() {
    let (spec, theta) = reference();
    let grid = AggregationGrid::uniform(50.0, 1.0).unwrap();
    let env = posterior_predictive_envelope(&theta, &spec, &grid, 500, &[0.025, 0.975], 15).unwrap();
    let fresh = simulate_replicates(&spec, &theta, 50.0, 16, 200).unwrap();
    let (mut inside, mut total) = (0usize, 0usize);
    for path in &fresh {
        let counts = aggregate(path, &grid, 2).unwrap();
        for m in 0..2 {
            let mut cumulative = 0u64;
            for (i, row) in counts.rows().iter().enumerate() {
                cumulative += row[m];
                let c = cumulative as f64;
                inside += usize::from(env.bands[m][0][i] <= c && c <= env.bands[m][1][i]);
                total += 1;
            }
        }
    }
    let coverage = inside as f64 / total as f64;
    assert!((0.93..=0.985).contains(&coverage), "coverage {coverage}");
}

#[test]
fn unexcited_envelope_matches_poisson_quantiles() {
    let nu = [0.8, 1.0];
    let (spec, theta) = poisson_only(&nu);
    let grid = AggregationGrid::uniform(20.0, 2.0).unwrap();
    let qs = [0.025, 0.5, 0.975];
    let env = posterior_predictive_envelope(&theta, &spec, &grid, 4000, &qs, 17).unwrap();
    for (m, rate) in nu.into_iter().enumerate() {
        for (i, &t) in env.times.iter().enumerate() {
            let law = Poisson::new(rate * t).unwrap();
            for (q, &p) in qs.iter().enumerate() {
                let exact = law.inverse_cdf(p) as f64;
                let got = env.bands[m][q][i];
                assert!((got - exact).abs() <= 1.0, "type {m}, t {t}, q {p}: {got} vs {exact}");
            }
        }
    }
}

#[test]
fn tied_kernels_stay_tied_along_the_chain() {
    let (spec, theta) = reference();
    let path = &simulate_replicates(&spec, &theta, 10.0, 18, 1).unwrap()[0];
    let counts = aggregate(path, &AggregationGrid::uniform(10.0, 1.0).unwrap(), 2).unwrap();
    let pmmh = PmmhConfig {
        iterations: 200,
        particles: 20,
        seed: 19,
        init: ChainInit::Given(theta),
        ..PmmhConfig::default()
    };
    let chain = run_chain(&spec, &counts, &SmcConfig::new(20, 0), &pmmh).unwrap();
    assert!(chain.iter().any(|r| r.accepted));
    for record in &chain {
        let theta = spec.from_flat(&record.theta).unwrap();
        for row in &theta.kernels {
            assert_eq!(row[0], row[1], "iteration {}", record.iteration);
        }
    }
}
