//! Offspring densities and baseline rate functions.

use crate::special::{ln_gamma, regularized_lower_gamma};

/// An offspring density `h(s)` on `s ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// Exponential with mean `beta`.
    Exponential { beta: f64 },
    /// Gamma with `shape` κ and `scale` δ; `ln_norm = ln Γ(κ) + κ ln δ`.
    Gamma { shape: f64, scale: f64, ln_norm: f64 },
}

impl Kernel {
    pub fn exponential(beta: f64) -> Self {
        Kernel::Exponential { beta }
    }

    pub fn gamma(shape: f64, scale: f64) -> Self {
        Kernel::Gamma {
            shape,
            scale,
            ln_norm: ln_gamma(shape) + shape * scale.ln(),
        }
    }

    pub fn density(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        match *self {
            Kernel::Exponential { beta } => (-s / beta).exp() / beta,
            Kernel::Gamma {
                shape,
                scale,
                ln_norm,
            } => {
                if s == 0.0 {
                    return if shape < 1.0 {
                        f64::INFINITY
                    } else if shape == 1.0 {
                        1.0 / scale
                    } else {
                        0.0
                    };
                }
                ((shape - 1.0) * s.ln() - s / scale - ln_norm).exp()
            }
        }
    }

    /// `∫₀ˢ h`.
    pub fn cdf(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match *self {
            Kernel::Exponential { beta } => -(-s / beta).exp_m1(),
            Kernel::Gamma { shape, scale, .. } => regularized_lower_gamma(shape, s / scale),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Kernel::Exponential { beta } => beta,
            Kernel::Gamma { shape, scale, .. } => shape * scale,
        }
    }

    /// Location of the density maximum.
    pub fn mode(&self) -> f64 {
        match *self {
            Kernel::Exponential { .. } => 0.0,
            Kernel::Gamma { shape, scale, .. } => ((shape - 1.0) * scale).max(0.0),
        }
    }

    /// `sup_{s ∈ [a, b]} h(s)` for `0 ≤ a ≤ b`. Both families are unimodal.
    pub fn sup_on(&self, a: f64, b: f64) -> f64 {
        let mode = self.mode();
        if mode <= a {
            self.density(a)
        } else if mode >= b {
            self.density(b)
        } else {
            self.density(mode)
        }
    }

    /// Whether the density is bounded near zero (needed for thinning).
    pub fn is_bounded(&self) -> bool {
        match *self {
            Kernel::Exponential { .. } => true,
            Kernel::Gamma { shape, .. } => shape >= 1.0,
        }
    }
}

/// Background rate ν(t) of one event type.
#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    Constant(f64),
    /// Order-2 B-spline: linear interpolation of `values` at `nodes`
    /// (`nodes[0] = 0`, last node is the right end), held constant outside.
    PiecewiseLinear { nodes: Vec<f64>, values: Vec<f64> },
}

impl Baseline {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Baseline::Constant(c) => *c,
            Baseline::PiecewiseLinear { nodes, values } => {
                let last = nodes.len() - 1;
                if t <= nodes[0] {
                    return values[0];
                }
                if t >= nodes[last] {
                    return values[last];
                }
                let k = nodes.partition_point(|&x| x <= t) - 1;
                let w = (t - nodes[k]) / (nodes[k + 1] - nodes[k]);
                values[k] + w * (values[k + 1] - values[k])
            }
        }
    }

    /// Exact `∫ₐᵇ ν(t) dt`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            Baseline::Constant(c) => c * (b - a),
            Baseline::PiecewiseLinear { nodes, .. } => {
                if b <= a {
                    return 0.0;
                }
                let mut total = 0.0;
                let mut left = a;
                // breakpoints strictly inside (a, b)
                for &x in nodes.iter().filter(|&&x| x > a && x < b) {
                    total += 0.5 * (self.value(left) + self.value(x)) * (x - left);
                    left = x;
                }
                total + 0.5 * (self.value(left) + self.value(b)) * (b - left)
            }
        }
    }

    pub fn max_on(&self, a: f64, b: f64) -> f64 {
        match self {
            Baseline::Constant(c) => *c,
            Baseline::PiecewiseLinear { nodes, values } => nodes
                .iter()
                .zip(values)
                .filter(|(&x, _)| x > a && x < b)
                .map(|(_, &v)| v)
                .fold(self.value(a).max(self.value(b)), f64::max),
        }
    }

    pub fn coefficient_count(&self) -> usize {
        match self {
            Baseline::Constant(_) => 1,
            Baseline::PiecewiseLinear { values, .. } => values.len(),
        }
    }

    /// Partial derivatives of ν(t) with respect to each coefficient.
    pub fn basis(&self, t: f64) -> Vec<f64> {
        match self {
            Baseline::Constant(_) => vec![1.0],
            Baseline::PiecewiseLinear { nodes, values } => {
                let mut out = vec![0.0; values.len()];
                let last = nodes.len() - 1;
                if t <= nodes[0] {
                    out[0] = 1.0;
                } else if t >= nodes[last] {
                    out[last] = 1.0;
                } else {
                    let k = nodes.partition_point(|&x| x <= t) - 1;
                    let w = (t - nodes[k]) / (nodes[k + 1] - nodes[k]);
                    out[k] = 1.0 - w;
                    out[k + 1] = w;
                }
                out
            }
        }
    }

    /// Partial derivatives of `∫ₐᵇ ν` with respect to each coefficient.
    pub fn basis_integral(&self, a: f64, b: f64) -> Vec<f64> {
        match self {
            Baseline::Constant(_) => vec![b - a],
            Baseline::PiecewiseLinear { nodes, values } => (0..values.len())
                .map(|i| {
                    let mut unit = vec![0.0; values.len()];
                    unit[i] = 1.0;
                    Baseline::PiecewiseLinear {
                        nodes: nodes.clone(),
                        values: unit,
                    }
                    .integral(a, b)
                })
                .collect(),
        }
    }
}
