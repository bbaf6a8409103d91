use mixbasis::basis::PhiTensor;
use mixbasis::sampler::{log_joint, GibbsState, KPrior};
use mixbasis::synth::{generate, small_spec, synth1_spec, synth2_spec, SynthSpec};
use statrs::distribution::{Beta, ContinuousCDF};

/// CDF of `sum_t theta_t Phi_t` for degree-`d` Bernstein functions, each a
/// Beta(t + 1, d - t + 1) density.
fn mixture_cdf(theta: &[f64], x: f64) -> f64 {
    let d = theta.len() - 1;
    theta
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(t, w)| w * Beta::new((t + 1) as f64, (d - t + 1) as f64).unwrap().cdf(x))
        .sum()
}

fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn check_ks(spec: &SynthSpec, limit: f64) {
    let synth = generate(spec).unwrap();
    for (r, theta_r) in spec.theta.iter().enumerate() {
        for (j, theta) in theta_r.iter().enumerate() {
            let xs: Vec<f64> = (0..synth.data.n_obs())
                .filter(|&i| synth.labels[i] == r)
                .map(|i| synth.data.get(i, j))
                .collect();
            assert_eq!(xs.len(), 500);
            let d = ks_distance(xs, |x| mixture_cdf(theta, x));
            assert!(d < limit, "group {r} item {j}: KS {d}");
        }
    }
}

#[test]
fn synth1_draws_follow_their_densities() {
    check_ks(&synth1_spec(), 0.05);
}

#[test]
fn synth2_draws_follow_their_densities() {
    // 1.95 / sqrt(500): the 0.1% critical value of the KS statistic.
    check_ks(&synth2_spec(), 1.95 / 500f64.sqrt());
}

#[test]
fn generated_configuration_has_finite_joint() {
    for spec in [synth1_spec(), small_spec(75)] {
        let synth = generate(&spec).unwrap();
        let phi = PhiTensor::evaluate(synth.data.values(), &spec.specs).unwrap();
        let state = GibbsState::from_assignment(phi.sizes(), &synth.labels, &synth.slots).unwrap();
        assert!(log_joint(&state, &phi, &KPrior::Uniform).is_finite());
        for i in 0..phi.n_obs() {
            for j in 0..phi.n_items() {
                assert!(phi.cell(i, j)[state.slots_of(i)[j] as usize] > 0.0);
            }
        }
    }
}

#[test]
fn theta_rows_are_distributions() {
    for spec in [synth1_spec(), synth2_spec()] {
        for row in spec.theta.iter().flatten() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }
    let bimodal = &synth2_spec().theta[0][0];
    assert_eq!(bimodal, &vec![0.5, 0.0, 0.0, 0.5]);
}
