use proptest::prelude::*;

use mhp_core::model::{stationary_mean_rates, EpsilonMatrix, KernelFamily};
use mhp_core::smc::{effective_sample_size, normalized_weights, smc_log_likelihood, SmcConfig};
use mhp_core::special::log_sum_exp;
use mhp_core::{aggregate, AggregationGrid, EventSequence, IntervalCounts, Model, ModelSpec, ParameterVector};

fn square(d: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(lo..hi, d), d)
}

fn exponential_theta(d: usize) -> impl Strategy<Value = ParameterVector> {
    (
        prop::collection::vec(0.1f64..3.0, d),
        square(d, 0.0, 0.9 / d as f64),
        square(d, 0.05, 3.0),
    )
        .prop_map(|(nu, eta, beta)| ParameterVector::exponential(&nu, eta, beta))
}

fn gamma_theta(d: usize) -> impl Strategy<Value = ParameterVector> {
    (
        prop::collection::vec(0.1f64..3.0, d),
        square(d, 0.0, 0.9 / d as f64),
        square(d, 0.3, 5.0),
        square(d, 0.1, 3.0),
    )
        .prop_map(|(nu, eta, shape, scale)| ParameterVector::gamma(&nu, eta, shape, scale))
}

fn history(d: usize, max_events: usize) -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    prop::collection::vec((0.0f64..100.0, 0..d), 0..max_events).prop_map(|mut ev| {
        ev.sort_by(|a, b| a.0.total_cmp(&b.0));
        ev.dedup_by(|a, b| a.0 == b.0);
        ev.into_iter().filter(|e| e.0 > 0.0).unzip()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn epsilon_recursion_matches_direct_sum(
        (theta, (times, types), probes) in (1usize..=3).prop_flat_map(|d| (
            exponential_theta(d),
            history(d, 1000),
            prop::collection::vec(0.0f64..100.0, 20),
        ))
    ) {
        let d = theta.nu.len();
        let spec = ModelSpec::uniform(d, KernelFamily::Exponential).unwrap();
        let model = Model::new(&spec, &theta).unwrap();
        let mut probes = probes;
        probes.sort_by(f64::total_cmp);
        let mut eps = EpsilonMatrix::zeros(d, 0.0);
        let mut k = 0;
        for &t in &probes {
            // events strictly before the probe enter the state
            while k < times.len() && times[k] < t {
                eps = eps.advance(&model, times[k], Some((times[k], types[k]))).unwrap();
                k += 1;
            }
            let at = eps.advance(&model, t, None).unwrap();
            for m in 0..d {
                let recursive = model.baseline(m).value(t) + at.excitation(m);
                let direct = model.intensity_from(&times, &types, m, t);
                prop_assert!((recursive - direct).abs() <= 1e-10 * (1.0 + direct), "{recursive} vs {direct}");
            }
        }
    }

    #[test]
    fn antiderivative_is_monotone_and_bounded(
        theta in prop_oneof![exponential_theta(2), gamma_theta(2)],
        s in prop::collection::vec(0.0f64..50.0, 30),
    ) {
        let family = match theta.kernels[0][0] {
            mhp_core::model::KernelParams::Exponential { .. } => KernelFamily::Exponential,
            _ => KernelFamily::Gamma,
        };
        let spec = ModelSpec::uniform(2, family).unwrap();
        let model = Model::new(&spec, &theta).unwrap();
        let mut s = s;
        s.sort_by(f64::total_cmp);
        for m in 0..2 {
            for j in 0..2 {
                let g: Vec<f64> = s.iter().map(|&x| model.excitation_antiderivative(m, j, x).unwrap()).collect();
                prop_assert!(g.windows(2).all(|w| w[0] <= w[1]));
                prop_assert!(g.iter().all(|&v| (0.0..=theta.eta[m][j]).contains(&v)));
            }
        }
    }

    #[test]
    fn antiderivative_differentiates_to_the_kernel(
        theta in prop_oneof![exponential_theta(2), gamma_theta(2)],
        s in 0.05f64..20.0,
    ) {
        let family = match theta.kernels[0][0] {
            mhp_core::model::KernelParams::Exponential { .. } => KernelFamily::Exponential,
            _ => KernelFamily::Gamma,
        };
        let spec = ModelSpec::uniform(2, family).unwrap();
        let model = Model::new(&spec, &theta).unwrap();
        let h = 1e-5;
        for m in 0..2 {
            for j in 0..2 {
                let g = |x| model.excitation_antiderivative(m, j, x).unwrap();
                let numeric = (g(s + h) - g(s - h)) / (2.0 * h);
                let exact = model.excitation(m, j, s);
                // absolute floor for densities that underflow far in the tail
                prop_assert!((numeric - exact).abs() <= 1e-5 * exact.abs() + 1e-9, "{numeric} vs {exact}");
            }
        }
    }

    #[test]
    fn stationary_rates_without_excitation_equal_baselines(nu in prop::collection::vec(0.0f64..10.0, 1..5)) {
        let d = nu.len();
        let spec = ModelSpec::uniform(d, KernelFamily::Exponential).unwrap();
        let theta = ParameterVector::exponential(&nu, vec![vec![0.0; d]; d], vec![vec![1.0; d]; d]);
        prop_assert_eq!(stationary_mean_rates(&spec, &theta).unwrap(), nu);
    }

    #[test]
    fn flat_vectors_round_trip_bit_exactly(free in prop::collection::vec(1e-6f64..1e3, 8)) {
        let spec = ModelSpec::uniform(2, KernelFamily::Exponential)
            .unwrap()
            .with_row_tied_kernels()
            .unwrap();
        let theta = spec.from_flat(&free).unwrap();
        prop_assert_eq!(spec.to_flat(&theta).unwrap(), free);
        prop_assert_eq!(spec.from_flat(&spec.to_flat(&theta).unwrap()).unwrap(), theta.clone());
        for row in &theta.kernels {
            prop_assert_eq!(&row[0], &row[1]);
        }
    }

    #[test]
    fn aggregation_conserves_events(
        (times, types) in history(3, 200),
        width in 0.1f64..20.0,
    ) {
        let path = EventSequence::new(times, types, 100.0, 3).unwrap();
        let counts = aggregate(&path, &AggregationGrid::uniform(100.0, width).unwrap(), 3).unwrap();
        prop_assert_eq!(counts.totals_by_type(), path.count_by_type(3));
    }

    #[test]
    fn filter_output_is_well_formed(
        theta in exponential_theta(2),
        rows in prop::collection::vec(prop::collection::vec(0u64..4, 2), 1..12),
        particles in 2usize..40,
        seed in any::<u64>(),
    ) {
        let spec = ModelSpec::uniform(2, KernelFamily::Exponential).unwrap();
        let grid = AggregationGrid::uniform(rows.len() as f64 * 0.7, 0.7).unwrap();
        let counts = IntervalCounts::new(grid, rows).unwrap();
        let r = smc_log_likelihood(&spec, &theta, &counts, &SmcConfig::new(particles, seed)).unwrap();
        prop_assert!(r.ess_trace.iter().all(|&e| (1.0..=particles as f64).contains(&e)));
        prop_assert!(!r.log_likelihood_estimate.is_nan());
    }

    #[test]
    fn weight_summaries_ignore_particle_order(
        lw in prop::collection::vec(prop_oneof![Just(f64::NEG_INFINITY), -50.0f64..50.0], 2..60),
        shift in 0usize..60,
    ) {
        prop_assume!(lw.iter().any(|w| w.is_finite()));
        let mut rotated = lw.clone();
        rotated.rotate_left(shift % lw.len());
        rotated.reverse();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs());
        prop_assert!(close(log_sum_exp(&lw), log_sum_exp(&rotated)));
        prop_assert!(close(effective_sample_size(&lw), effective_sample_size(&rotated)));
        let mut a = normalized_weights(&lw).unwrap();
        let mut b = normalized_weights(&rotated).unwrap();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert!(a.iter().zip(&b).all(|(x, y)| close(*x, *y)));
    }
}
