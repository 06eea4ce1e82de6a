use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};

/// Normalized weights `exp(lw − max) / Σ`. Errors when every entry is −∞.
pub fn normalized_weights(log_weights: &[f64]) -> Result<Vec<f64>> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::AllParticlesDead);
    }
    let mut w: Vec<f64> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Effective sample size `(Σw)² / Σw²` of unnormalized log weights.
pub fn effective_sample_size(log_weights: &[f64]) -> f64 {
    match normalized_weights(log_weights) {
        Ok(w) => 1.0 / w.iter().map(|x| x * x).sum::<f64>(),
        Err(_) => 0.0,
    }
}

/// Multinomial resampling: `count` ancestor indices drawn i.i.d. from the
/// normalized weights. Sorted uniforms come from normalized exponential
/// spacings, so the whole pass is linear.
pub fn resample_indices<R: Rng + ?Sized>(log_weights: &[f64], count: usize, rng: &mut R) -> Result<Vec<usize>> {
    let w = normalized_weights(log_weights)?;
    let mut spacings = Vec::with_capacity(count + 1);
    let mut total = 0.0;
    for _ in 0..=count {
        let e: f64 = Exp1.sample(rng);
        total += e;
        spacings.push(total);
    }
    let mut out = Vec::with_capacity(count);
    let mut cdf = w[0];
    let mut j = 0;
    let last = w.len() - 1;
    for &s in &spacings[..count] {
        let u = s / total;
        while u > cdf && j < last {
            j += 1;
            cdf += w[j];
        }
        // skip zero-weight tail entries reached through rounding
        while w[j] == 0.0 && j > 0 {
            j -= 1;
        }
        out.push(j);
    }
    Ok(out)
}
