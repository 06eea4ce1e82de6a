//! Chain diagnostics and plotting tables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmmh::ChainRecord;

pub const MAX_REPORTED_LAG: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDiagnostics {
    pub parameter: String,
    pub mean: f64,
    pub sd: f64,
    /// Lags `0..=min(50, n-1)`.
    pub autocorrelation: Vec<f64>,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub records: usize,
    /// Accepted moves over all records.
    pub acceptance_rate: f64,
    pub parameters: Vec<ParameterDiagnostics>,
}

/// Diagnostics for the whole chain; apply burn-in by slicing beforehand.
pub fn chain_diagnostics(chain: &[ChainRecord], names: &[String]) -> Result<ChainReport> {
    let Some(first) = chain.first() else {
        return Err(Error::InvalidInput("cannot diagnose an empty chain".into()));
    };
    if names.len() != first.theta.len() {
        return Err(Error::InvalidInput(format!(
            "{} names for {} parameters",
            names.len(),
            first.theta.len()
        )));
    }
    let accepted = chain.iter().filter(|r| r.accepted).count();
    let parameters = names
        .iter()
        .enumerate()
        .map(|(p, name)| {
            let x: Vec<f64> = chain.iter().map(|r| r.theta[p]).collect();
            let (mean, var) = mean_var(&x);
            ParameterDiagnostics {
                parameter: name.clone(),
                mean,
                sd: var.sqrt(),
                autocorrelation: autocorrelation(&x, MAX_REPORTED_LAG),
                ess: effective_sample_size(&x),
            }
        })
        .collect();
    Ok(ChainReport {
        records: chain.len(),
        acceptance_rate: accepted as f64 / chain.len() as f64,
        parameters,
    })
}

/// Mean and biased variance.
fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

fn autocovariance(centred: &[f64], lag: usize) -> f64 {
    let n = centred.len();
    centred[..n - lag]
        .iter()
        .zip(&centred[lag..])
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / n as f64
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

fn centred(x: &[f64]) -> Vec<f64> {
    let (mean, _) = mean_var(x);
    x.iter().map(|v| v - mean).collect()
}

/// Sample autocorrelations at lags `0..=min(max_lag, n-1)`. A constant
/// series is reported as perfectly correlated.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let top = max_lag.min(x.len() - 1);
    if is_constant(x) {
        return vec![1.0; top + 1];
    }
    let c = centred(x);
    let g0 = autocovariance(&c, 0);
    (0..=top).map(|k| autocovariance(&c, k) / g0).collect()
}

/// Geyer's initial monotone sequence estimator `n / τ`, where
/// `τ = −1 + 2 Σ Γ_k` over the positive, monotonised pair sums
/// `Γ_k = ρ_{2k} + ρ_{2k+1}`. A constant series gives 1.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return n as f64;
    }
    if is_constant(x) {
        return 1.0;
    }
    let c = centred(x);
    let g0 = autocovariance(&c, 0);
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (autocovariance(&c, 2 * k) + autocovariance(&c, 2 * k + 1)) / g0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    n as f64 / tau
}

/// `iteration,<names>,log_lik_hat,accepted`.
pub fn write_trace<W: Write>(writer: W, chain: &[ChainRecord], names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["iteration".to_string()];
    header.extend(names.iter().cloned());
    header.push("log_lik_hat".into());
    header.push("accepted".into());
    w.write_record(&header)?;
    for r in chain {
        let mut row = vec![r.iteration.to_string()];
        row.extend(r.theta.iter().map(f64::to_string));
        row.push(r.log_lik_hat.to_string());
        row.push(r.accepted.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `parameter,bin_low,bin_high,count` with `bins` equal-width bins spanning
/// each parameter's range.
pub fn write_histograms<W: Write>(writer: W, chain: &[ChainRecord], names: &[String], bins: usize) -> Result<()> {
    if bins == 0 {
        return Err(Error::InvalidInput("histograms need at least one bin".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["parameter", "bin_low", "bin_high", "count"])?;
    for (p, name) in names.iter().enumerate() {
        let x: Vec<f64> = chain.iter().map(|r| r.theta[p]).collect();
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            continue;
        }
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins];
        for v in &x {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        for (b, c) in counts.iter().enumerate() {
            w.write_record([
                name.clone(),
                (lo + b as f64 * width).to_string(),
                (lo + (b + 1) as f64 * width).to_string(),
                c.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `lag,<names>`.
pub fn write_autocorrelation<W: Write>(writer: W, report: &ChainReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["lag".to_string()];
    header.extend(report.parameters.iter().map(|p| p.parameter.clone()));
    w.write_record(&header)?;
    let lags = report.parameters.first().map_or(0, |p| p.autocorrelation.len());
    for k in 0..lags {
        let mut row = vec![k.to_string()];
        row.extend(report.parameters.iter().map(|p| p.autocorrelation[k].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand_distr::{Distribution, StandardNormal};

    fn chain_of(x: &[f64], accepted: impl Fn(usize) -> bool) -> Vec<ChainRecord> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| ChainRecord {
                iteration: i,
                theta: vec![v],
                log_lik_hat: -1.0,
                accepted: accepted(i),
            })
            .collect()
    }

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, Purpose::Replicate, &[]);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn iid_ess_is_close_to_n() {
        let n = 20_000;
        let ess = effective_sample_size(&gaussian(n, 1));
        assert!((ess / n as f64 - 1.0).abs() < 0.1, "ess {ess}");
    }

    #[test]
    fn ar1_ess_matches_the_closed_form() {
        // ESS / n = (1 − φ) / (1 + φ) for AR(1)
        let phi: f64 = 0.9;
        let n = 200_000;
        let z = gaussian(n, 2);
        let mut x = vec![0.0; n];
        x[0] = z[0] / (1.0 - phi * phi).sqrt();
        for i in 1..n {
            x[i] = phi * x[i - 1] + z[i];
        }
        let ratio = effective_sample_size(&x) / n as f64;
        let target = (1.0 - phi) / (1.0 + phi);
        assert!((ratio / target - 1.0).abs() < 0.2, "ratio {ratio}");
        let rho = autocorrelation(&x, 3);
        assert!((rho[1] - phi).abs() < 0.01);
        assert!((rho[3] - phi.powi(3)).abs() < 0.02);
    }

    #[test]
    fn constant_chain_has_zero_acceptance() {
        let chain = chain_of(&[0.7; 500], |i| i == 0);
        let report = chain_diagnostics(&chain[1..], &["x".into()]).unwrap();
        assert_eq!(report.acceptance_rate, 0.0);
        assert_eq!(report.parameters[0].ess, 1.0);
        assert_eq!(report.parameters[0].autocorrelation.len(), MAX_REPORTED_LAG + 1);
    }

    #[test]
    fn empty_chain_is_rejected() {
        assert!(chain_diagnostics(&[], &[]).is_err());
    }

    #[test]
    fn tables_have_expected_shape() {
        let chain = chain_of(&gaussian(1000, 3), |i| i % 3 == 0);
        let names = vec!["nu[1]".to_string()];
        let mut buf = Vec::new();
        write_histograms(&mut buf, &chain, &names, 20).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 21);
        let total: usize = text
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(total, 1000);

        let mut buf = Vec::new();
        write_trace(&mut buf, &chain[..2], &names).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,nu[1],log_lik_hat,accepted\n0,"));
        assert!(text.lines().nth(1).unwrap().ends_with(",-1,true"));

        let report = chain_diagnostics(&chain, &names).unwrap();
        let mut buf = Vec::new();
        write_autocorrelation(&mut buf, &report).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), MAX_REPORTED_LAG + 2);
    }
}
