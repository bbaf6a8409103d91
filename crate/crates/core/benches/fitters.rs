use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mixbasis::analysis::consensus_matrix;
use mixbasis::basis::{BasisSpec, PhiTensor};
use mixbasis::em::{fit_em_from, EmParams};
use mixbasis::oracle::exact_posterior;
use mixbasis::sampler::{run_sampler, GibbsState, Init, KPrior, Sampler, SampleSet, SamplerOptions};
use mixbasis::synth::{generate, synth1_spec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn synth1_phi() -> PhiTensor {
    let synth = generate(&synth1_spec()).unwrap();
    PhiTensor::evaluate(synth.data.values(), &vec![BasisSpec::bernstein(3); 3]).unwrap()
}

fn tiny_phi() -> PhiTensor {
    let xs = [0.1, 0.8, 0.25, 0.7, 0.5, 0.5, 0.9, 0.15, 0.3, 0.35, 0.65, 0.6, 0.05, 0.95];
    PhiTensor::evaluate(&xs, &[BasisSpec::bernstein(1), BasisSpec::bernstein(1)]).unwrap()
}

fn samples(phi: &PhiTensor) -> SampleSet {
    let opts = SamplerOptions {
        burn_in_sweeps: 50,
        sample_sweeps: 200,
        seed: 1,
        ..SamplerOptions::default()
    };
    run_sampler(phi, &KPrior::Uniform, &opts).unwrap()
}

/// Runs `f` on the global pool and on a single-thread pool. Without the
/// `parallel` feature only the sequential build is measured.
fn compare<F: Fn() + Sync>(c: &mut Criterion, group: &str, f: F) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        g.bench_function(BenchmarkId::new("rayon", rayon::current_num_threads()), |b| b.iter(&f));
        g.bench_function(BenchmarkId::new("rayon", 1), |b| b.iter(|| one.install(&f)));
    }
    #[cfg(not(feature = "parallel"))]
    g.bench_function("sequential", |b| b.iter(&f));
    g.finish();
}

fn benches(c: &mut Criterion) {
    let phi = synth1_phi();
    let init = EmParams::random(3, phi.sizes(), &mut ChaCha8Rng::seed_from_u64(3));
    compare(c, "em_50_iterations_synth1", || {
        black_box(fit_em_from(&phi, init.clone(), 50, 0.0).unwrap());
    });

    let tiny = tiny_phi();
    compare(c, "exact_posterior_n7", || {
        black_box(exact_posterior(&tiny, &KPrior::Uniform).unwrap());
    });

    let set = samples(&phi);
    compare(c, "consensus_200x1500", || {
        black_box(consensus_matrix(&set).unwrap());
    });

    let mut g = c.benchmark_group("gibbs");
    let mut sampler = Sampler::new(&phi, &KPrior::Uniform).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut state = GibbsState::initial(&phi, Init::AllInOne, &mut rng).unwrap();
    g.bench_function("sweep_synth1", |b| {
        b.iter(|| {
            for _ in 0..phi.n_obs() {
                sampler.step(&mut state, &mut rng);
            }
        })
    });
    g.finish();
}

criterion_group!(fitters, benches);
criterion_main!(fitters);
