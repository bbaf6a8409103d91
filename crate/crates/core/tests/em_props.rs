mod common;

use mixbasis::analysis::{theta_map_from_g, ThetaMapOptions};
use mixbasis::em::{e_step, fit_em, fit_em_from, log_marginal_posterior_em, m_step, EmOptions, EmParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, n: usize, degrees: &[usize]) -> mixbasis::basis::PhiTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    common::random_bernstein_phi(&mut rng, n, degrees)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn objective_never_decreases(seed in any::<u64>(), n in 3usize..25, k in 1usize..4, d in 1usize..5) {
        let phi = instance(seed, n, &[d, d + 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let fit = fit_em_from(&phi, EmParams::random(k, phi.sizes(), &mut rng), 500, 0.0).unwrap();
        for w in fit.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn responsibilities_are_consistent(seed in any::<u64>(), n in 2usize..15, k in 1usize..4) {
        let phi = instance(seed, n, &[2, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = EmParams::random(k, phi.sizes(), &mut rng);
        let resp = e_step(&phi, &params).unwrap();
        for i in 0..n {
            let q = resp.q_comp(i);
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (r, &qr) in q.iter().enumerate() {
                for j in 0..2 {
                    let s: f64 = (0..phi.sizes()[j]).map(|t| resp.q_slot(i, j, r, t)).sum();
                    prop_assert!((s - qr).abs() < 1e-12);
                }
            }
        }
        let next = m_step(&resp, &phi).unwrap();
        prop_assert!((next.pi().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for r in 0..k {
            for j in 0..2 {
                prop_assert!((next.theta(r, j).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn relabeling_commutes_with_em(seed in any::<u64>(), n in 3usize..15) {
        let phi = instance(seed, n, &[3]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = EmParams::random(3, phi.sizes(), &mut rng);
        let perm = [2, 0, 1];
        let a = fit_em_from(&phi, params.clone(), 50, 0.0).unwrap();
        let b = fit_em_from(&phi, params.permuted(&perm), 50, 0.0).unwrap();
        prop_assert!(a.params.permuted(&perm).max_abs_diff(&b.params) < 1e-9);
        prop_assert!((a.log_post - b.log_post).abs() < 1e-9);
        for i in 0..n {
            for (r, &p) in perm.iter().enumerate() {
                prop_assert!((b.resp.q_comp(i)[r] - a.resp.q_comp(i)[p]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn converged_fit_is_a_fixed_point() {
    let phi = instance(3, 40, &[3, 3]);
    let opts = EmOptions {
        tol: 1e-10,
        max_iter: 100_000,
        restarts: 3,
        seed: 2,
    };
    let fit = fit_em(&phi, 2, &opts).unwrap();
    assert!(fit.converged);
    let again = m_step(&e_step(&phi, &fit.params).unwrap(), &phi).unwrap();
    assert!(again.max_abs_diff(&fit.params) < 1e-9);
    let lp = log_marginal_posterior_em(&phi, &fit.params).unwrap();
    assert!((lp - fit.log_post).abs() < 1e-9);
}

#[test]
fn single_component_matches_map_from_labels() {
    let phi = instance(5, 30, &[2, 4]);
    let fit = fit_em_from(&phi, EmParams::uniform(1, phi.sizes()), 200_000, 1e-12).unwrap();
    assert!(fit.converged);
    let theta = theta_map_from_g(&[0; 30], &phi, &ThetaMapOptions::default()).unwrap();
    for (j, exact) in theta[0].iter().enumerate() {
        for (a, b) in fit.params.theta(0, j).iter().zip(exact) {
            assert!((a - b).abs() < 1e-6, "item {j}: {a} vs {b}");
        }
    }
}

#[test]
fn restarts_are_reproducible() {
    let phi = instance(8, 60, &[3, 3, 3]);
    let opts = EmOptions {
        restarts: 4,
        seed: 17,
        ..EmOptions::default()
    };
    let a = fit_em(&phi, 3, &opts).unwrap();
    let b = fit_em(&phi, 3, &opts).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.restart, b.restart);
}

#[test]
fn invalid_component_counts_are_rejected() {
    let phi = instance(1, 5, &[2]);
    assert!(fit_em(&phi, 0, &EmOptions::default()).is_err());
    assert!(fit_em(&phi, 6, &EmOptions::default()).is_err());
}
