//! Latent event histories carried by particles.

use std::sync::Arc;

use crate::model::{EpsilonMatrix, Model};

/// What a particle needs to remember about its imputed past.
pub trait ParticleHistory: Clone + Send + Sync {
    /// Appends sorted events in `(t_prev, t_cur]` and returns
    /// `Σ_k log λ_{z_k}(τ_k) − ∫_{t_prev}^{t_cur} Σ_m φ_m(s) ds`, the
    /// excitation part of the compensator only.
    fn extend(&mut self, model: &Model, t_prev: f64, t_cur: f64, times: &[f64], types: &[usize]) -> f64;

    fn event_count(&self) -> usize;
}

/// O(M²) state for all-exponential models.
#[derive(Debug, Clone)]
pub struct EpsilonHistory {
    eps: EpsilonMatrix,
    count: usize,
}

impl EpsilonHistory {
    pub fn new(dim: usize) -> Self {
        EpsilonHistory {
            eps: EpsilonMatrix::zeros(dim, 0.0),
            count: 0,
        }
    }

    pub fn state(&self) -> &EpsilonMatrix {
        &self.eps
    }
}

impl ParticleHistory for EpsilonHistory {
    fn extend(&mut self, model: &Model, _t_prev: f64, t_cur: f64, times: &[f64], types: &[usize]) -> f64 {
        let mut integral = 0.0;
        let mut log_rate = 0.0;
        for (&tau, &z) in times.iter().zip(types) {
            integral += self.eps.decay_to(model, tau);
            log_rate += (model.baseline(z).value(tau) + self.eps.excitation(z)).ln();
            self.eps.add_event(model, z);
        }
        integral += self.eps.decay_to(model, t_cur);
        self.count += times.len();
        log_rate - integral
    }

    fn event_count(&self) -> usize {
        self.count
    }
}

struct Node {
    time: f64,
    ty: usize,
    parent: Option<Arc<Node>>,
}

impl Drop for Node {
    // Unlink iteratively so long chains do not overflow the stack.
    fn drop(&mut self) {
        let mut next = self.parent.take();
        while let Some(node) = next {
            match Arc::try_unwrap(node) {
                Ok(mut inner) => next = inner.parent.take(),
                Err(_) => break,
            }
        }
    }
}

/// Full event list, shared between resampled descendants as a persistent
/// linked list (newest first). Works for any kernel family.
#[derive(Clone, Default)]
pub struct FullHistory {
    head: Option<Arc<Node>>,
    count: usize,
}

impl std::fmt::Debug for FullHistory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FullHistory").field("count", &self.count).finish()
    }
}

impl FullHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Events newest first.
    pub fn iter(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        let mut cur = self.head.as_deref();
        std::iter::from_fn(move || {
            let node = cur?;
            cur = node.parent.as_deref();
            Some((node.time, node.ty))
        })
    }

    /// Events in time order.
    pub fn to_vecs(&self) -> (Vec<f64>, Vec<usize>) {
        let mut events: Vec<(f64, usize)> = self.iter().collect();
        events.reverse();
        events.into_iter().unzip()
    }

    fn push(&mut self, time: f64, ty: usize) {
        self.head = Some(Arc::new(Node {
            time,
            ty,
            parent: self.head.take(),
        }));
        self.count += 1;
    }
}

impl ParticleHistory for FullHistory {
    fn extend(&mut self, model: &Model, t_prev: f64, t_cur: f64, times: &[f64], types: &[usize]) -> f64 {
        let d = model.dimension();
        let mut integral = 0.0;
        let mut log_rate = 0.0;
        let mut rates = smallvec::SmallVec::<[f64; 32]>::from_elem(0.0, times.len());
        for (tau_old, p) in self.iter() {
            for m in 0..d {
                if model.eta(m, p) > 0.0 {
                    integral += model.antiderivative_unchecked(m, p, t_cur - tau_old)
                        - model.antiderivative_unchecked(m, p, t_prev - tau_old);
                }
            }
            for (r, (&tau, &z)) in rates.iter_mut().zip(times.iter().zip(types)) {
                *r += model.excitation(z, p, tau - tau_old);
            }
        }
        for (k, (&tau, &z)) in times.iter().zip(types).enumerate() {
            let mut rate = model.baseline(z).value(tau) + rates[k];
            for j in 0..k {
                rate += model.excitation(z, types[j], tau - times[j]);
            }
            log_rate += rate.ln();
            for m in 0..d {
                if model.eta(m, z) > 0.0 {
                    integral += model.antiderivative_unchecked(m, z, t_cur - tau);
                }
            }
        }
        for (&tau, &z) in times.iter().zip(types) {
            self.push(tau, z);
        }
        log_rate - integral
    }

    fn event_count(&self) -> usize {
        self.count
    }
}
