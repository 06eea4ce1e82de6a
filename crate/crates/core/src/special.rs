//! Special functions and small numerical helpers shared across the crate.

use std::sync::OnceLock;

/// Φ⁻¹(0.975), the two-sided 95% normal quantile.
pub const NORMAL_Q975: f64 = 1.959964;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const LN_FACTORIAL_CACHE: usize = 10_000;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(LN_FACTORIAL_CACHE + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for k in 1..=LN_FACTORIAL_CACHE {
            acc += (k as f64).ln();
            table.push(acc);
        }
        table
    })
}

/// `ln(n!)`, tabulated for `n ≤ 10⁴`.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) <= LN_FACTORIAL_CACHE {
        ln_factorial_table()[n as usize]
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// Regularized lower incomplete gamma function P(a, x).
///
/// Series expansion below `x < a + 1`, Lentz continued fraction for the
/// upper tail otherwise. Absolute accuracy is about 1e-14 over the range
/// used by the kernels.
pub fn regularized_lower_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (sum.ln() + log_prefactor).exp().min(1.0)
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-17 {
                break;
            }
        }
        let upper = (log_prefactor + h.ln()).exp();
        (1.0 - upper).max(0.0)
    }
}

/// Quantile of the Gamma(shape, rate = 1) distribution.
pub fn gamma_quantile(shape: f64, p: f64) -> f64 {
    debug_assert!(shape > 0.0 && p > 0.0 && p < 1.0);
    // bracket, then safeguarded Newton
    let mut lo = 0.0;
    let mut hi = shape.max(1.0);
    while regularized_lower_gamma(shape, hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = regularized_lower_gamma(shape, x) - p;
        if f.abs() < 1e-15 {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let log_pdf = (shape - 1.0) * x.ln() - x - ln_gamma(shape);
        let step = f / log_pdf.exp();
        let next = x - step;
        x = if next > lo && next < hi && step.is_finite() {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    x
}

/// `ln Σ exp(xᵢ)`, returning −∞ when every term is −∞.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Sample quantile by linear interpolation between order statistics
/// (Hyndman–Fan type 7, the R default). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and arbitrary quantiles of an unsorted sample.
pub fn quantiles(sample: &[f64], ps: &[f64]) -> Vec<f64> {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    ps.iter().map(|&p| quantile_sorted(&sorted, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        for n in 1..30u64 {
            let direct: f64 = (1..n).map(|k| (k as f64).ln()).sum();
            assert!((ln_gamma(n as f64) - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn ln_factorial_switches_to_gamma_smoothly() {
        let a = ln_factorial(10_000);
        let b = ln_gamma(10_001.0);
        assert!((a - b).abs() / b < 1e-12);
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
    }

    #[test]
    fn incomplete_gamma_reference_values() {
        // shape 1 is the exponential CDF; shape 2 is 1 - (1 + x) e^{-x}
        for &x in &[0.01, 0.5, 1.0, 2.0, 7.5, 30.0] {
            assert!((regularized_lower_gamma(1.0, x) - (1.0 - (-x).exp())).abs() < 1e-14);
            let p2 = 1.0 - (1.0 + x) * (-x).exp();
            assert!((regularized_lower_gamma(2.0, x) - p2).abs() < 1e-14);
        }
        // shape 0.5: erf(sqrt(x)); erf(1) = 0.8427007929497149
        assert!((regularized_lower_gamma(0.5, 1.0) - 0.842_700_792_949_714_9).abs() < 1e-13);
    }

    #[test]
    fn incomplete_gamma_matches_statrs() {
        for &a in &[0.3, 1.7, 3.0, 12.5, 80.0] {
            for &x in &[0.05, 0.9, 2.5, 11.0, 60.0, 95.0] {
                let ours = regularized_lower_gamma(a, x);
                let theirs = statrs::function::gamma::gamma_lr(a, x);
                assert!((ours - theirs).abs() < 1e-12, "a={a} x={x}: {ours} vs {theirs}");
            }
        }
    }

    #[test]
    fn gamma_quantile_inverts_cdf() {
        for n in 1..60 {
            let q = gamma_quantile(n as f64, 0.95);
            assert!((regularized_lower_gamma(n as f64, q) - 0.95).abs() < 1e-12);
        }
        // shape 1: -ln(0.05)
        assert!((gamma_quantile(1.0, 0.95) - 2.995_732_273_553_991).abs() < 1e-10);
    }

    #[test]
    fn log_sum_exp_handles_infinities() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, f64::NEG_INFINITY]) - 0.0).abs() < 1e-15);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn type7_quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert!((quantile_sorted(&s, 0.025) - 1.075).abs() < 1e-15);
    }
}
