//! Proposal distributions for the latent event times and types of one
//! observation window.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Ordered uniform times on `(t_prev, t_cur]` by exponential spacings:
/// `n + 1` unit exponential gaps, normalized by their total and cumulated.
/// Linear in `n`, no sort.
pub fn propose_times_uniform_into<R: Rng + ?Sized>(
    t_prev: f64,
    t_cur: f64,
    n: usize,
    rng: &mut R,
    out: &mut impl Extend<f64>,
) {
    if n == 0 {
        return;
    }
    let mut gaps = smallvec::SmallVec::<[f64; 32]>::with_capacity(n + 1);
    let mut total = 0.0;
    for _ in 0..=n {
        let g: f64 = Exp1.sample(rng);
        total += g;
        gaps.push(g);
    }
    let width = t_cur - t_prev;
    let scale = width / total;
    let mut acc = 0.0;
    out.extend(gaps[..n].iter().map(|g| {
        acc += g;
        t_prev + acc * scale
    }));
}

pub fn propose_times_uniform<R: Rng + ?Sized>(t_prev: f64, t_cur: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    propose_times_uniform_into(t_prev, t_cur, n, rng, &mut out);
    out
}

/// The first `n` arrivals of a rate-`rate` Poisson process started at
/// `t_prev`. Arrivals may fall beyond the window.
pub fn propose_times_poisson_into<R: Rng + ?Sized>(
    t_prev: f64,
    rate: f64,
    n: usize,
    rng: &mut R,
    out: &mut impl Extend<f64>,
) {
    let mut t = t_prev;
    out.extend((0..n).map(|_| {
        let g: f64 = Exp1.sample(rng);
        t += g / rate;
        t
    }));
}

pub fn propose_times_poisson<R: Rng + ?Sized>(t_prev: f64, rate: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    propose_times_poisson_into(t_prev, rate, n, rng, &mut out);
    out
}

/// A uniformly random arrangement of the multiset with `counts[m]` copies
/// of each type `m`.
pub fn propose_types_into<R: Rng + ?Sized>(counts: &[u64], rng: &mut R, out: &mut smallvec::SmallVec<[usize; 32]>) {
    out.clear();
    for (m, &c) in counts.iter().enumerate() {
        out.extend(std::iter::repeat_n(m, c as usize));
    }
    out.shuffle(rng);
}

pub fn propose_types<R: Rng + ?Sized>(counts: &[u64], rng: &mut R) -> Vec<usize> {
    let mut out = smallvec::SmallVec::new();
    propose_types_into(counts, rng, &mut out);
    out.into_vec()
}
