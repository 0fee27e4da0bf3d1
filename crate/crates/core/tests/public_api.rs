use std::f64::consts::PI;

use critgw_core::dists::{DiscreteLaw, ImmigrationLaw, OffspringLaw};
use critgw_core::genfun::{
    iterate_f, predicted_progeny_tail, predicted_stationary_tail, stationary_pgf, theta_fn_closed, ChainModel,
};
use critgw_core::sim::{progeny_samples, run_chain, ChainConfig};
use proptest::prelude::*;

fn models() -> Vec<ChainModel> {
    vec![
        ChainModel::new(
            OffspringLaw::power_fractional(0.5).unwrap(),
            ImmigrationLaw::constant(1).unwrap(),
        ),
        ChainModel::new(
            OffspringLaw::slack(0.3, 0.5).unwrap(),
            ImmigrationLaw::sibuya(0.8).unwrap(),
        ),
        ChainModel::new(
            OffspringLaw::slack(0.7, 0.4).unwrap(),
            ImmigrationLaw::poisson(1.5).unwrap(),
        ),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // phi(s) = g(s) phi(f(s))
    #[test]
    fn stationary_pgf_solves_the_functional_equation(which in 0usize..3, s in 0.0f64..0.98) {
        let model = &models()[which];
        let phi = stationary_pgf(model, s, 1e-6).unwrap();
        let fs = model.offspring().pgf(s);
        let phi_f = stationary_pgf(model, fs, 1e-6).unwrap();
        let rhs = model.immigration().pgf(s) * phi_f.value;
        let slack = 10.0 * (phi.error_bound + phi_f.error_bound) + 1e-12;
        prop_assert!((phi.value - rhs).abs() <= slack, "{} vs {}", phi.value, rhs);
    }

    #[test]
    fn offspring_iterates_compose(alpha in 0.1f64..0.9, s in 0.0f64..0.999, m in 1u64..50, n in 1u64..50) {
        let f = OffspringLaw::power_fractional(alpha).unwrap();
        let direct = iterate_f(&f, s, m + n);
        let composed = iterate_f(&f, iterate_f(&f, s, n), m);
        prop_assert!((direct - composed).abs() <= 1e-13);
        let exact = theta_fn_closed(alpha, s, m + n);
        prop_assert!(((direct - exact) / exact).abs() <= 1e-12);
    }
}

#[test]
fn predicted_tails_for_the_theta_half_chain() {
    let model = &models()[0];
    let tail = predicted_stationary_tail(model).unwrap();
    assert!((tail.index - 0.5).abs() < 1e-12);
    assert!((tail.constant - 1.0 / PI.sqrt()).abs() < 1e-9);
    let progeny = predicted_progeny_tail(model.offspring());
    assert!((progeny.index - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn chain_output_depends_only_on_seed() {
    let model = &models()[1];
    let cfg = ChainConfig { n: 5_000, burn_in: 100, seed: 9, stream_id: 2, ..Default::default() };
    let a = run_chain(model, &cfg).unwrap();
    let b = run_chain(model, &cfg).unwrap();
    assert_eq!(a.values, b.values);
    let c = run_chain(model, &ChainConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a.values, c.values);
}

#[test]
fn replicates_do_not_depend_on_the_thread_count() {
    let f = OffspringLaw::slack(0.5, 0.5).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| progeny_samples(&f, 5_000, 1_000_000, 3))
    };
    assert_eq!(run(1), run(4));
}
