use smallvec::SmallVec;

use super::Model;
use crate::error::{Error, Result};

/// Excitation state for exponential kernels.
///
/// `get(m, p)` is the contribution of type-`p` events to `λ_m` at the
/// anchor time. Between events every entry decays by `exp(−Δ/β_{m,p})`, and
/// an event of type `p` adds `η_{m,p}/β_{m,p}` to column `p`, so no event
/// history has to be kept.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonMatrix {
    dim: usize,
    eps: SmallVec<[f64; 9]>,
    anchor: f64,
}

impl EpsilonMatrix {
    pub fn zeros(dim: usize, anchor: f64) -> Self {
        EpsilonMatrix {
            dim,
            eps: SmallVec::from_elem(0.0, dim * dim),
            anchor,
        }
    }

    /// From explicit row-major entries.
    pub fn from_entries(dim: usize, entries: &[f64], anchor: f64) -> Self {
        assert_eq!(entries.len(), dim * dim);
        EpsilonMatrix {
            dim,
            eps: SmallVec::from_slice(entries),
            anchor,
        }
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn get(&self, m: usize, p: usize) -> f64 {
        self.eps[m * self.dim + p]
    }

    /// `φ_m` at the anchor: `Σ_p ε_{m,p}`.
    pub fn excitation(&self, m: usize) -> f64 {
        self.eps[m * self.dim..(m + 1) * self.dim].iter().sum()
    }

    /// `Σ_{m,p} ε_{m,p}`.
    pub fn total(&self) -> f64 {
        self.eps.iter().sum()
    }

    /// Decays every entry from the anchor to `t` and returns
    /// `∫_{anchor}^{t} Σ_{m,p} ε_{m,p}(s) ds`. Requires `t ≥ anchor` and
    /// all kernels exponential.
    #[inline]
    pub fn decay_to(&mut self, model: &Model, t: f64) -> f64 {
        let dt = t - self.anchor;
        debug_assert!(dt >= 0.0);
        self.anchor = t;
        if dt == 0.0 {
            return 0.0;
        }
        let betas = model.betas();
        let mut integral = 0.0;
        for (e, &beta) in self.eps.iter_mut().zip(betas) {
            if *e != 0.0 {
                let keep = (-dt / beta).exp();
                integral += *e * beta * (1.0 - keep);
                *e *= keep;
            }
        }
        integral
    }

    /// Adds the jump of a type-`ty` event located at the anchor.
    #[inline]
    pub fn add_event(&mut self, model: &Model, ty: usize) {
        let d = self.dim;
        let jumps = model.jumps();
        for m in 0..d {
            self.eps[m * d + ty] += jumps[m * d + ty];
        }
    }

    /// Moves the matrix to time `to`. When `event = (τ, p)` is given, the
    /// matrix first decays to `τ`, receives the jump `η_{m,p}/β_{m,p}` in
    /// column `p`, then decays on to `to`.
    pub fn advance(&self, model: &Model, to: f64, event: Option<(f64, usize)>) -> Result<EpsilonMatrix> {
        if !model.all_exponential() {
            let d = model.dimension();
            let (m, j) = (0..d * d)
                .map(|i| (i / d, i % d))
                .find(|&(m, j)| !matches!(model.kernel(m, j), super::Kernel::Exponential { .. }))
                .unwrap_or((0, 0));
            return Err(Error::NonExponentialKernel { m: m + 1, j: j + 1 });
        }
        if to < self.anchor {
            return Err(Error::TimeReversal {
                from: self.anchor,
                to,
            });
        }
        let mut next = self.clone();
        if let Some((tau, ty)) = event {
            if tau < self.anchor || tau > to {
                return Err(Error::TimeReversal {
                    from: self.anchor,
                    to: tau,
                });
            }
            next.decay_to(model, tau);
            next.add_event(model, ty);
        }
        next.decay_to(model, to);
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KernelFamily, ModelSpec, ParameterVector};
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn model() -> Model {
        let spec = ModelSpec::uniform(2, KernelFamily::Exponential).unwrap();
        let theta = ParameterVector::exponential(
            &[0.8, 1.0],
            vec![vec![0.6, 0.3], vec![0.25, 0.5]],
            vec![vec![0.5, 0.5], vec![0.75, 0.75]],
        );
        Model::new(&spec, &theta).unwrap()
    }

    #[test]
    fn zero_stays_zero() {
        let m = model();
        let eps = EpsilonMatrix::zeros(2, 0.0);
        let next = eps.advance(&m, 7.3, None).unwrap();
        assert_eq!(next.total(), 0.0);
        assert_eq!(next.anchor(), 7.3);
    }

    #[test]
    fn scalar_decay() {
        let m = model();
        let eps = EpsilonMatrix::from_entries(2, &[1.2, 0.0, 0.0, 0.0], 1.0);
        let next = eps.advance(&m, 1.5, None).unwrap();
        assert!((next.get(0, 0) - 1.2 * (-1f64).exp()).abs() < 1e-15);
        assert!((next.get(0, 0) - 0.44146).abs() < 1e-5);
    }

    #[test]
    fn errors() {
        let m = model();
        let eps = EpsilonMatrix::zeros(2, 2.0);
        assert!(matches!(eps.advance(&m, 1.0, None), Err(Error::TimeReversal { .. })));
        assert!(matches!(
            eps.advance(&m, 3.0, Some((1.0, 0))),
            Err(Error::TimeReversal { .. })
        ));
        let gspec = ModelSpec::uniform(1, KernelFamily::Gamma).unwrap();
        let gtheta = ParameterVector::gamma(&[1.0], vec![vec![0.1]], vec![vec![2.0]], vec![vec![1.0]]);
        let gm = Model::new(&gspec, &gtheta).unwrap();
        assert!(matches!(
            EpsilonMatrix::zeros(1, 0.0).advance(&gm, 1.0, None),
            Err(Error::NonExponentialKernel { .. })
        ));
    }

    #[test]
    fn recursion_matches_direct_sum_on_random_history() {
        let m = model();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        let mut t = 0.0;
        let mut times = Vec::new();
        let mut types = Vec::new();
        for _ in 0..50 {
            t += rng.random::<f64>() * 0.4 + 1e-3;
            times.push(t);
            types.push(rng.random_range(0..2));
        }
        let probes: Vec<f64> = (1..=20).map(|k| t * k as f64 / 20.0 + 0.01).collect();
        let mut eps = EpsilonMatrix::zeros(2, 0.0);
        let mut next_event = 0;
        for &probe in &probes {
            while next_event < times.len() && times[next_event] < probe {
                eps = eps
                    .advance(&m, times[next_event], Some((times[next_event], types[next_event])))
                    .unwrap();
                next_event += 1;
            }
            let at = eps.advance(&m, probe, None).unwrap();
            for ty in 0..2 {
                let direct = m.intensity_from(&times, &types, ty, probe);
                let rec = m.baseline(ty).value(probe) + at.excitation(ty);
                assert!((direct - rec).abs() <= 1e-10 * (1.0 + direct), "{direct} vs {rec}");
            }
        }
    }
}
