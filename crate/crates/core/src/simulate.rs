//! Exact simulation of sample paths.
//!
//! The default sampler is Ogata thinning of the total intensity. Gamma
//! kernels with shape below one have unbounded densities at zero, so paths
//! for such models are drawn from the cluster (branching) representation
//! instead; [`simulate_cluster`] is also public and serves as an independent
//! check on the thinning sampler.

use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1, Gamma, Poisson};

use crate::data::EventSequence;
use crate::error::{Error, Result};
use crate::model::{validate, EpsilonMatrix, Kernel, Model, ModelSpec, ParameterVector, ValidationMode};
use crate::par;
use crate::rng::{stream, Purpose};

pub const DEFAULT_EVENT_CAP: usize = 10_000_000;

/// Draws one path on `(0, horizon]`, deterministic given `seed`.
pub fn simulate_path(spec: &ModelSpec, theta: &ParameterVector, horizon: f64, seed: u64) -> Result<EventSequence> {
    validate(spec, theta, ValidationMode::FiniteHorizon)?;
    let model = Model::new(spec, theta)?;
    let mut rng = stream(seed, Purpose::Simulate, &[]);
    simulate_model(&model, horizon, &mut rng, DEFAULT_EVENT_CAP)
}

/// `count` independent paths; replicate `r` uses the stream derived from
/// `(seed, r)`, so the batch is identical at any thread count.
pub fn simulate_replicates(
    spec: &ModelSpec,
    theta: &ParameterVector,
    horizon: f64,
    seed: u64,
    count: usize,
) -> Result<Vec<EventSequence>> {
    validate(spec, theta, ValidationMode::FiniteHorizon)?;
    let model = Model::new(spec, theta)?;
    par::map_indices(count, |r| {
        let mut rng = stream(seed, Purpose::Replicate, &[r as u64]);
        simulate_model(&model, horizon, &mut rng, DEFAULT_EVENT_CAP)
    })
    .into_iter()
    .collect()
}

/// Thinning when every kernel is bounded, otherwise the cluster sampler.
pub fn simulate_model<R: Rng + ?Sized>(model: &Model, horizon: f64, rng: &mut R, cap: usize) -> Result<EventSequence> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let d = model.dimension();
    let bounded = (0..d).all(|m| (0..d).all(|j| model.eta(m, j) == 0.0 || model.kernel(m, j).is_bounded()));
    if bounded {
        simulate_thinning(model, horizon, rng, cap)
    } else {
        simulate_cluster(model, horizon, rng, cap)
    }
}

fn lookahead(model: &Model, horizon: f64) -> f64 {
    let d = model.dimension();
    let mut total = 0.0;
    let mut count = 0;
    for m in 0..d {
        for j in 0..d {
            if model.eta(m, j) > 0.0 {
                total += model.kernel(m, j).mean();
                count += 1;
            }
        }
    }
    if count == 0 {
        horizon
    } else {
        total / count as f64
    }
}

/// Ogata thinning. The dominating rate over the window `[t, t + w]` is the
/// baseline maximum plus, per past event, the kernel supremum over the
/// shifted window (for exponential kernels, the current excitation).
pub fn simulate_thinning<R: Rng + ?Sized>(model: &Model, horizon: f64, rng: &mut R, cap: usize) -> Result<EventSequence> {
    let d = model.dimension();
    let window = lookahead(model, horizon);
    let exp_path = model.all_exponential();
    let mut eps = EpsilonMatrix::zeros(d, 0.0);
    let mut times: Vec<f64> = Vec::new();
    let mut types: Vec<usize> = Vec::new();
    let mut rates = vec![0.0; d];
    let mut t = 0.0;

    while t < horizon {
        let w = window.min(horizon - t);
        let base_bound: f64 = (0..d).map(|m| model.baseline(m).max_on(t, t + w)).sum();
        let excite_bound = if exp_path {
            eps.total()
        } else {
            let mut b = 0.0;
            for (&tau, &z) in times.iter().zip(&types) {
                for m in 0..d {
                    let eta = model.eta(m, z);
                    if eta > 0.0 {
                        b += eta * model.kernel(m, z).sup_on(t - tau, t + w - tau);
                    }
                }
            }
            b
        };
        let bound = base_bound + excite_bound;
        if bound <= 0.0 {
            t += w;
            if exp_path {
                eps.decay_to(model, t);
            }
            continue;
        }
        let gap: f64 = Exp1.sample(rng);
        let gap = gap / bound;
        if gap > w {
            t += w;
            if exp_path {
                eps.decay_to(model, t);
            }
            continue;
        }
        t += gap;
        let mut total = 0.0;
        if exp_path {
            eps.decay_to(model, t);
            for (m, r) in rates.iter_mut().enumerate() {
                *r = model.baseline(m).value(t) + eps.excitation(m);
                total += *r;
            }
        } else {
            for (m, r) in rates.iter_mut().enumerate() {
                *r = model.intensity_from(&times, &types, m, t);
                total += *r;
            }
        }
        debug_assert!(
            total <= bound * (1.0 + 1e-9),
            "thinning bound violated: {total} > {bound}"
        );
        let u: f64 = rng.random::<f64>() * bound;
        if u <= total {
            let mut acc = 0.0;
            let mut ty = d - 1;
            for (m, &r) in rates.iter().enumerate() {
                acc += r;
                if u < acc {
                    ty = m;
                    break;
                }
            }
            if times.len() >= cap {
                return Err(Error::UnstableExplosion { cap });
            }
            times.push(t);
            types.push(ty);
            if exp_path {
                eps.add_event(model, ty);
            }
        }
    }
    Ok(EventSequence::from_parts_unchecked(times, types, horizon))
}

fn sample_delay<R: Rng + ?Sized>(kernel: &Kernel, rng: &mut R) -> f64 {
    match *kernel {
        Kernel::Exponential { beta } => Exp::new(1.0 / beta).expect("positive beta").sample(rng),
        Kernel::Gamma { shape, scale, .. } => Gamma::new(shape, scale).expect("positive gamma").sample(rng),
    }
}

/// Cluster representation: background immigrants by thinning the baseline,
/// then `Poisson(η_{m,j})` type-`m` children per type-`j` parent with
/// delays drawn from `h_{m,j}`; descendants beyond the horizon are dropped.
pub fn simulate_cluster<R: Rng + ?Sized>(model: &Model, horizon: f64, rng: &mut R, cap: usize) -> Result<EventSequence> {
    let d = model.dimension();
    let mut events: Vec<(f64, usize)> = Vec::new();
    for m in 0..d {
        let bl = model.baseline(m);
        let bound = bl.max_on(0.0, horizon);
        if bound <= 0.0 {
            continue;
        }
        let arrivals = Exp::new(bound).expect("positive rate");
        let mut t = 0.0;
        loop {
            t += arrivals.sample(rng);
            if t > horizon {
                break;
            }
            if rng.random::<f64>() * bound <= bl.value(t) {
                events.push((t, m));
            }
        }
    }
    let mut next = 0;
    while next < events.len() {
        let (parent_t, j) = events[next];
        next += 1;
        for m in 0..d {
            let eta = model.eta(m, j);
            if eta <= 0.0 {
                continue;
            }
            let children = Poisson::new(eta).expect("positive mean").sample(rng) as usize;
            for _ in 0..children {
                let t = parent_t + sample_delay(model.kernel(m, j), rng);
                if t <= horizon {
                    events.push((t, m));
                }
            }
        }
        if events.len() > cap {
            return Err(Error::UnstableExplosion { cap });
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (times, types) = events.into_iter().unzip();
    Ok(EventSequence::from_parts_unchecked(times, types, horizon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{reference_model, KernelFamily};

    #[test]
    fn same_seed_same_path() {
        let (spec, theta) = reference_model();
        let a = simulate_path(&spec, &theta, 20.0, 5).unwrap();
        let b = simulate_path(&spec, &theta, 20.0, 5).unwrap();
        let c = simulate_path(&spec, &theta, 20.0, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.times().windows(2).all(|w| w[0] < w[1]));
        assert!(a.times().iter().all(|&t| t > 0.0 && t <= 20.0));
    }

    #[test]
    fn explosion_cap_triggers() {
        let spec = ModelSpec::uniform(1, KernelFamily::Exponential).unwrap();
        let theta = ParameterVector::exponential(&[5.0], vec![vec![1.5]], vec![vec![0.1]]);
        let model = Model::new(&spec, &theta).unwrap();
        let mut rng = stream(1, Purpose::Simulate, &[]);
        assert!(matches!(
            simulate_model(&model, 1000.0, &mut rng, 500),
            Err(Error::UnstableExplosion { cap: 500 })
        ));
    }

    #[test]
    fn invalid_parameters_rejected() {
        let spec = ModelSpec::uniform(1, KernelFamily::Exponential).unwrap();
        let theta = ParameterVector::exponential(&[-1.0], vec![vec![0.5]], vec![vec![0.1]]);
        assert!(simulate_path(&spec, &theta, 1.0, 0).is_err());
    }

    #[test]
    fn small_shape_gamma_uses_cluster_sampler() {
        let spec = ModelSpec::uniform(1, KernelFamily::Gamma).unwrap();
        let theta = ParameterVector::gamma(&[2.0], vec![vec![0.5]], vec![vec![0.5]], vec![vec![1.0]]);
        let path = simulate_path(&spec, &theta, 50.0, 3).unwrap();
        assert!(!path.is_empty());
        assert!(path.times().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn replicates_do_not_depend_on_order() {
        let (spec, theta) = reference_model();
        let batch = simulate_replicates(&spec, &theta, 5.0, 9, 4).unwrap();
        let model = Model::new(&spec, &theta).unwrap();
        let mut rng = stream(9, Purpose::Replicate, &[2]);
        let single = simulate_model(&model, 5.0, &mut rng, DEFAULT_EVENT_CAP).unwrap();
        assert_eq!(batch[2], single);
    }
}
