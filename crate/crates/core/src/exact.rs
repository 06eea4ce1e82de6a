//! Complete-data likelihood when event times are observed, and its
//! maximizer.
//!
//! The log-likelihood of a path on `(0, T]` is
//! `Σ_k log λ_{z_k}(τ_k) − ∫_0^T λ*(t) dt`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::EventSequence;
use crate::error::{Error, Result};
use crate::model::{validate, EpsilonMatrix, Location, Model, ModelSpec, ParameterVector, ValidationMode};

/// Validates `theta` and evaluates the log-likelihood, using the ε-recursion
/// when every kernel is exponential.
pub fn complete_loglik(spec: &ModelSpec, theta: &ParameterVector, path: &EventSequence) -> Result<f64> {
    validate(spec, theta, ValidationMode::FiniteHorizon)?;
    let model = Model::new(spec, theta)?;
    if model.all_exponential() {
        complete_loglik_recursive(&model, path)
    } else {
        complete_loglik_naive(&model, path)
    }
}

fn compensator_tail(model: &Model, path: &EventSequence) -> f64 {
    let d = model.dimension();
    let horizon = path.horizon();
    let mut total = model.total_baseline_integral(0.0, horizon);
    for (&tau, &z) in path.times().iter().zip(path.types()) {
        for m in 0..d {
            total += model.antiderivative_unchecked(m, z, horizon - tau);
        }
    }
    total
}

/// Direct O(n²) evaluation; any kernel family.
pub fn complete_loglik_naive(model: &Model, path: &EventSequence) -> Result<f64> {
    let (times, types) = (path.times(), path.types());
    let mut total = 0.0;
    for (k, (&tau, &z)) in times.iter().zip(types).enumerate() {
        let rate = model.intensity_from(&times[..k], &types[..k], z, tau);
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::NonFiniteLogLik { index: k + 1 });
        }
        total += rate.ln();
    }
    Ok(total - compensator_tail(model, path))
}

/// O(n·M²) evaluation through the ε-matrix; exponential kernels only.
pub fn complete_loglik_recursive(model: &Model, path: &EventSequence) -> Result<f64> {
    if !model.all_exponential() {
        // reuse the kernel check of `advance`
        EpsilonMatrix::zeros(model.dimension(), 0.0).advance(model, 0.0, None)?;
    }
    let mut eps = EpsilonMatrix::zeros(model.dimension(), 0.0);
    let mut total = 0.0;
    let mut integral = 0.0;
    for (k, (&tau, &z)) in path.times().iter().zip(path.types()).enumerate() {
        integral += eps.decay_to(model, tau);
        let rate = model.baseline(z).value(tau) + eps.excitation(z);
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::NonFiniteLogLik { index: k + 1 });
        }
        total += rate.ln();
        eps.add_event(model, z);
    }
    integral += eps.decay_to(model, path.horizon());
    Ok(total - integral - model.total_baseline_integral(0.0, path.horizon()))
}

/// Gradient of the log-likelihood in full-layout order, exponential kernels
/// only. Uses the recursions
/// `R_{m,p}(t) = Σ_{z_k=p, τ_k<t} e^{−(t−τ_k)/β_{m,p}}` and
/// `S_{m,p}(t) = Σ_{z_k=p, τ_k<t} (t−τ_k) e^{−(t−τ_k)/β_{m,p}}`.
pub fn complete_loglik_gradient_full(spec: &ModelSpec, model: &Model, path: &EventSequence) -> Result<Vec<f64>> {
    if !model.all_exponential() {
        EpsilonMatrix::zeros(model.dimension(), 0.0).advance(model, 0.0, None)?;
    }
    let d = model.dimension();
    let horizon = path.horizon();
    let beta = model.betas();
    let mut r = vec![0.0; d * d];
    let mut s = vec![0.0; d * d];
    // partials with respect to η_{m,p}, β_{m,p} and ν coefficients
    let mut g_eta = vec![0.0; d * d];
    let mut g_beta = vec![0.0; d * d];
    let mut g_nu: Vec<Vec<f64>> = (0..d).map(|m| vec![0.0; model.baseline(m).coefficient_count()]).collect();
    let mut anchor = 0.0;

    for (k, (&tau, &z)) in path.times().iter().zip(path.types()).enumerate() {
        let dt = tau - anchor;
        if dt > 0.0 {
            for i in 0..d * d {
                let keep = (-dt / beta[i]).exp();
                s[i] = (s[i] + dt * r[i]) * keep;
                r[i] *= keep;
            }
        }
        anchor = tau;
        let m = z;
        let mut rate = model.baseline(m).value(tau);
        for p in 0..d {
            let i = m * d + p;
            rate += model.eta(m, p) / beta[i] * r[i];
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::NonFiniteLogLik { index: k + 1 });
        }
        let inv = 1.0 / rate;
        for (c, b) in g_nu[m].iter_mut().zip(model.baseline(m).basis(tau)) {
            *c += b * inv;
        }
        for p in 0..d {
            let i = m * d + p;
            let bt = beta[i];
            g_eta[i] += r[i] / bt * inv;
            g_beta[i] += model.eta(m, p) * (s[i] / (bt * bt * bt) - r[i] / (bt * bt)) * inv;
        }
        for mm in 0..d {
            r[mm * d + z] += 1.0;
        }
    }
    for (&tau, &p) in path.times().iter().zip(path.types()) {
        let u = horizon - tau;
        for m in 0..d {
            let i = m * d + p;
            let bt = beta[i];
            let keep = (-u / bt).exp();
            g_eta[i] -= 1.0 - keep;
            g_beta[i] += model.eta(m, p) * u / (bt * bt) * keep;
        }
    }
    for (m, g) in g_nu.iter_mut().enumerate() {
        for (c, b) in g.iter_mut().zip(model.baseline(m).basis_integral(0.0, horizon)) {
            *c -= b;
        }
    }
    Ok(spec
        .full_layout()
        .iter()
        .map(|slot| match slot.location {
            Location::Nu { ty, coef } => g_nu[ty][coef],
            Location::Eta { m, j } => g_eta[m * d + j],
            Location::Beta { m, j } => g_beta[m * d + j],
            Location::Shape { .. } | Location::Scale { .. } => unreachable!("exponential model"),
        })
        .collect())
}

/// Gradient with respect to the free coordinates.
pub fn complete_loglik_gradient(spec: &ModelSpec, theta: &ParameterVector, path: &EventSequence) -> Result<Vec<f64>> {
    validate(spec, theta, ValidationMode::FiniteHorizon)?;
    let model = Model::new(spec, theta)?;
    Ok(spec.collapse_gradient(&complete_loglik_gradient_full(spec, &model, path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub theta: ParameterVector,
    pub names: Vec<String>,
    pub estimate: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    pub hessian_step: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            gradient_tolerance: 1e-6,
            max_iterations: 500,
            hessian_step: 1e-4,
        }
    }
}

/// Log-likelihood as a function of the free flat vector; −∞ outside the
/// domain or where some event has zero intensity.
struct Objective<'a> {
    spec: &'a ModelSpec,
    path: &'a EventSequence,
    analytic: bool,
}

impl Objective<'_> {
    fn value(&self, free: &[f64]) -> f64 {
        let Ok(theta) = self.spec.from_flat(free) else {
            return f64::NEG_INFINITY;
        };
        complete_loglik(self.spec, &theta, self.path).unwrap_or(f64::NEG_INFINITY)
    }

    /// Gradient in the free coordinates; finite differences on the log
    /// scale when no analytic form exists.
    fn gradient(&self, free: &[f64]) -> Option<Vec<f64>> {
        if self.analytic {
            let theta = self.spec.from_flat(free).ok()?;
            return complete_loglik_gradient(self.spec, &theta, self.path).ok();
        }
        let mut x = free.to_vec();
        let mut g = vec![0.0; free.len()];
        for i in 0..free.len() {
            let h = 1e-6 * free[i].abs().max(1e-8);
            x[i] = free[i] + h;
            let up = self.value(&x);
            x[i] = free[i] - h;
            let down = self.value(&x);
            x[i] = free[i];
            if !(up.is_finite() && down.is_finite()) {
                return None;
            }
            g[i] = (up - down) / (2.0 * h);
        }
        Some(g)
    }
}

/// Maximum-likelihood fit from `init` by BFGS on log coordinates, with
/// covariance from a central-difference Hessian on the original scale.
/// Zero entries of `init` are moved to 1e-3 so their logarithms exist.
pub fn mle_fit(spec: &ModelSpec, path: &EventSequence, init: &ParameterVector) -> Result<MleFit> {
    mle_fit_with(spec, path, init, &MleOptions::default())
}

pub fn mle_fit_with(spec: &ModelSpec, path: &EventSequence, init: &ParameterVector, opts: &MleOptions) -> Result<MleFit> {
    validate(spec, init, ValidationMode::FiniteHorizon)?;
    let objective = Objective {
        spec,
        path,
        analytic: spec.all_exponential(),
    };
    let start: Vec<f64> = spec
        .to_flat(init)?
        .into_iter()
        .map(|v| if v > 0.0 { v.ln() } else { 1e-3f64.ln() })
        .collect();

    // minimize −ℓ(exp(y))
    let f = |y: &[f64]| -> f64 {
        let x: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        -objective.value(&x)
    };
    let grad = |y: &[f64]| -> Option<Vec<f64>> {
        let x: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        let g = objective.gradient(&x)?;
        Some(g.iter().zip(&x).map(|(gi, xi)| -gi * xi).collect())
    };

    let (y, iterations, converged) = bfgs(&f, &grad, start, opts)?;
    let free: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    let theta = spec.from_flat(&free)?;
    let log_likelihood = objective.value(&free);
    if !log_likelihood.is_finite() {
        return Err(Error::OptimizerDiverged("non-finite log-likelihood at the optimum".into()));
    }

    let hessian = numerical_hessian(&objective, &free, opts.hessian_step);
    let n = free.len();
    let neg = DMatrix::from_fn(n, n, |i, j| -hessian[i][j]);
    let inv = neg.try_inverse().ok_or(Error::SingularHessian)?;
    if (0..n).any(|i| !(inv[(i, i)] > 0.0 && inv[(i, i)].is_finite())) {
        return Err(Error::SingularHessian);
    }
    let covariance: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect();
    let standard_errors = (0..n).map(|i| inv[(i, i)].sqrt()).collect();

    Ok(MleFit {
        theta,
        names: spec.free_names(),
        estimate: free,
        standard_errors,
        covariance,
        log_likelihood,
        iterations,
        converged,
    })
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Plain BFGS with Armijo backtracking. Returns `(argmin, iterations,
/// converged)`.
fn bfgs<F, G>(f: &F, grad: &G, mut x: Vec<f64>, opts: &MleOptions) -> Result<(Vec<f64>, usize, bool)>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x.len();
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(Error::OptimizerDiverged("objective is not finite at the initial value".into()));
    }
    let mut g = grad(&x).ok_or_else(|| Error::OptimizerDiverged("gradient unavailable at the initial value".into()))?;
    let identity = |scale: f64| DMatrix::<f64>::identity(n, n) * scale;
    let mut h = identity(1.0);
    let mut fresh = true;

    for iter in 0..opts.max_iterations {
        if sup_norm(&g) <= opts.gradient_tolerance {
            return Ok((x, iter, true));
        }
        let gv = nalgebra::DVector::from_column_slice(&g);
        let mut dir: Vec<f64> = (-(&h * &gv)).iter().copied().collect();
        if dot(&dir, &g) >= 0.0 {
            h = identity(1.0);
            dir = g.iter().map(|v| -v).collect();
        }
        // keep the first trial step at most one log unit per coordinate
        let mut step = (1.0 / sup_norm(&dir)).min(1.0);
        let slope = dot(&dir, &g);
        let mut accepted = None;
        while step > 1e-16 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                if let Some(gt) = grad(&trial) {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            if fresh {
                // already steepest descent: no further progress possible
                return Ok((x, iter, sup_norm(&g) <= opts.gradient_tolerance));
            }
            h = identity(1.0);
            fresh = true;
            continue;
        };
        fresh = false;
        if xn.iter().any(|v| v.abs() > 700.0) {
            return Err(Error::OptimizerDiverged(format!("parameters left the representable range at iteration {iter}")));
        }
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if iter == 0 {
                h = identity(sy / dot(&y, &y));
            }
            let sv = nalgebra::DVector::from_column_slice(&s);
            let yv = nalgebra::DVector::from_column_slice(&y);
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            h += (&sv * sv.transpose()) * (rho * (1.0 + rho * yhy)) - (&hy * sv.transpose() + &sv * hy.transpose()) * rho;
        }
        x = xn;
        let improvement = fx - fnew;
        fx = fnew;
        g = gn;
        if improvement.abs() <= 1e-15 * (1.0 + fx.abs()) && sup_norm(&g) <= 1e3 * opts.gradient_tolerance {
            return Ok((x, iter + 1, true));
        }
    }
    let done = sup_norm(&g) <= opts.gradient_tolerance;
    Ok((x, opts.max_iterations, done))
}

/// Central-difference Hessian of the log-likelihood on the original scale,
/// step `rel · |x_i|`. Differences the analytic gradient when available.
fn numerical_hessian(objective: &Objective<'_>, x: &[f64], rel: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let steps: Vec<f64> = x.iter().map(|v| rel * v.abs().max(1e-8)).collect();
    let mut hess = vec![vec![0.0; n]; n];
    if objective.analytic {
        let mut xp = x.to_vec();
        for j in 0..n {
            xp[j] = x[j] + steps[j];
            let up = objective.gradient(&xp);
            xp[j] = x[j] - steps[j];
            let down = objective.gradient(&xp);
            xp[j] = x[j];
            let (Some(up), Some(down)) = (up, down) else {
                hess[j][j] = f64::NAN;
                continue;
            };
            for i in 0..n {
                hess[i][j] = (up[i] - down[i]) / (2.0 * steps[j]);
            }
        }
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (hess[i][j] + hess[j][i]);
                hess[i][j] = avg;
                hess[j][i] = avg;
            }
        }
    } else {
        let f0 = objective.value(x);
        let mut xp = x.to_vec();
        let mut eval = |pairs: &[(usize, f64)]| {
            for &(i, d) in pairs {
                xp[i] += d;
            }
            let v = objective.value(&xp);
            for &(i, d) in pairs {
                xp[i] -= d;
            }
            v
        };
        for i in 0..n {
            let hi = steps[i];
            hess[i][i] = (eval(&[(i, hi)]) - 2.0 * f0 + eval(&[(i, -hi)])) / (hi * hi);
            for j in 0..i {
                let hj = steps[j];
                let v = (eval(&[(i, hi), (j, hj)]) - eval(&[(i, hi), (j, -hj)]) - eval(&[(i, -hi), (j, hj)])
                    + eval(&[(i, -hi), (j, -hj)]))
                    / (4.0 * hi * hj);
                hess[i][j] = v;
                hess[j][i] = v;
            }
        }
    }
    hess
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{reference_model, BaselineSpec, KernelFamily};
    use crate::simulate::simulate_path;
    use proptest::prelude::*;

    fn poisson_spec() -> ModelSpec {
        ModelSpec::uniform(1, KernelFamily::Exponential).unwrap()
    }

    #[test]
    fn hand_evaluated_poisson() {
        let theta = ParameterVector::exponential(&[2.0], vec![vec![0.0]], vec![vec![1.0]]);
        let path = EventSequence::new(vec![0.5, 1.5], vec![0, 0], 2.0, 1).unwrap();
        let ll = complete_loglik(&poisson_spec(), &theta, &path).unwrap();
        assert!((ll - (2.0 * 2f64.ln() - 4.0)).abs() < 1e-12);
        assert!((ll + 2.61371).abs() < 1e-5);
    }

    #[test]
    fn empty_path_is_minus_baseline_mass() {
        let (spec, theta) = reference_model();
        let ll = complete_loglik(&spec, &theta, &EventSequence::empty(7.0)).unwrap();
        assert!((ll + 1.8 * 7.0).abs() < 1e-12);
    }

    #[test]
    fn zero_intensity_event_is_an_error() {
        let theta = ParameterVector::exponential(&[0.0], vec![vec![0.5]], vec![vec![1.0]]);
        let path = EventSequence::new(vec![0.5, 1.5], vec![0, 0], 2.0, 1).unwrap();
        assert!(matches!(
            complete_loglik(&poisson_spec(), &theta, &path),
            Err(Error::NonFiniteLogLik { index: 1 })
        ));
    }

    #[test]
    fn recursion_matches_naive_on_simulated_paths() {
        let (spec, theta) = reference_model();
        let model = Model::new(&spec, &theta).unwrap();
        for seed in 0..5 {
            let path = simulate_path(&spec, &theta, 60.0, seed).unwrap();
            let a = complete_loglik_recursive(&model, &path).unwrap();
            let b = complete_loglik_naive(&model, &path).unwrap();
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    fn numeric_gradient(spec: &ModelSpec, free: &[f64], path: &EventSequence) -> Vec<f64> {
        (0..free.len())
            .map(|i| {
                let h = 1e-6 * free[i].abs().max(1e-3);
                let mut up = free.to_vec();
                up[i] += h;
                let mut down = free.to_vec();
                down[i] -= h;
                let fu = complete_loglik(spec, &spec.from_flat(&up).unwrap(), path).unwrap();
                let fd = complete_loglik(spec, &spec.from_flat(&down).unwrap(), path).unwrap();
                (fu - fd) / (2.0 * h)
            })
            .collect()
    }

    fn assert_gradient_matches(spec: &ModelSpec, theta: &ParameterVector, path: &EventSequence) {
        let free = spec.to_flat(theta).unwrap();
        let analytic = complete_loglik_gradient(spec, theta, path).unwrap();
        let numeric = numeric_gradient(spec, &free, path);
        for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
            let scale = a.abs().max(n.abs()).max(1.0);
            assert!((a - n).abs() <= 1e-5 * scale, "coordinate {i}: {a} vs {n}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn analytic_gradient_matches_finite_differences(
            nu in proptest::collection::vec(0.3f64..2.0, 2),
            eta in proptest::collection::vec(0.05f64..0.6, 4),
            beta in proptest::collection::vec(0.2f64..2.0, 4),
            seed in 0u64..1000,
        ) {
            let spec = ModelSpec::uniform(2, KernelFamily::Exponential).unwrap();
            let theta = ParameterVector::exponential(
                &nu,
                vec![eta[..2].to_vec(), eta[2..].to_vec()],
                vec![beta[..2].to_vec(), beta[2..].to_vec()],
            );
            let path = simulate_path(&spec, &theta, 15.0, seed).unwrap();
            assert_gradient_matches(&spec, &theta, &path);
        }
    }

    #[test]
    fn gradient_with_ties_and_spline_baseline() {
        let (spec, theta) = reference_model();
        let path = simulate_path(&spec, &theta, 30.0, 8).unwrap();
        assert_gradient_matches(&spec, &theta, &path);

        let spec = ModelSpec::new(
            1,
            vec![BaselineSpec::BSpline {
                knots: vec![3.0, 7.0],
                end: 10.0,
            }],
            vec![vec![KernelFamily::Exponential]],
            vec![],
        )
        .unwrap();
        let mut theta = spec.zero_parameters();
        theta.nu[0] = vec![1.0, 2.5, 0.5, 1.5];
        theta.eta[0][0] = 0.4;
        let path = simulate_path(&spec, &theta, 10.0, 1).unwrap();
        assert_gradient_matches(&spec, &theta, &path);
    }

    #[test]
    fn pure_rate_mle_exact() {
        // η held at zero: the rate MLE is N/T
        let path = EventSequence::new(vec![0.3, 1.1, 2.5, 2.6, 4.0], vec![0; 5], 5.0, 1).unwrap();
        let spec = poisson_spec();
        let objective = Objective {
            spec: &spec,
            path: &path,
            analytic: true,
        };
        let f = |y: &[f64]| -objective.value(&[y[0].exp(), 0.0, 1.0]);
        let grad = |y: &[f64]| {
            let x = [y[0].exp(), 0.0, 1.0];
            objective.gradient(&x).map(|g| vec![-g[0] * x[0]])
        };
        let (y, _, converged) = bfgs(&f, &grad, vec![0.0], &MleOptions::default()).unwrap();
        assert!(converged);
        assert!((y[0].exp() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_inits_reach_the_same_optimum() {
        let (spec, theta) = reference_model();
        let path = simulate_path(&spec, &theta, 100.0, 21).unwrap();
        let a = mle_fit(&spec, &path, &theta).unwrap();
        let other = ParameterVector::exponential(
            &[0.4, 0.5],
            vec![vec![0.6, 0.2], vec![0.2, 0.6]],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        );
        let b = mle_fit(&spec, &path, &other).unwrap();
        assert!(a.converged && b.converged);
        assert!((a.log_likelihood - b.log_likelihood).abs() < 1e-4);
        assert!(a.standard_errors.iter().all(|s| s.is_finite() && *s > 0.0));
        let g = complete_loglik_gradient(&spec, &a.theta, &path).unwrap();
        let scaled: Vec<f64> = g.iter().zip(&a.estimate).map(|(g, x)| g * x).collect();
        assert!(sup_norm(&scaled) <= 1e-6, "{scaled:?}");
    }

    #[test]
    fn gamma_fit_runs_with_numeric_gradient() {
        let spec = ModelSpec::uniform(1, KernelFamily::Gamma).unwrap();
        let theta = ParameterVector::gamma(&[1.0], vec![vec![0.5]], vec![vec![2.0]], vec![vec![0.5]]);
        let path = simulate_path(&spec, &theta, 150.0, 3).unwrap();
        let fit = mle_fit(&spec, &path, &theta).unwrap();
        let at_truth = complete_loglik(&spec, &theta, &path).unwrap();
        assert!(fit.log_likelihood >= at_truth - 1e-9);
        assert_eq!(fit.names.len(), 4);
    }
}
