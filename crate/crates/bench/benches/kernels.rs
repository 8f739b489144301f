use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use spt_core::estimators::{action_moments, autocovariance, blocking_analysis};
use spt_core::rng;
use spt_core::rqmc::DirectionPolicy;
use spt_core::rspt::epsilon_series;
use spt_core::spectral::{evaluate_series, random_model, taylor_oracle, RandomModelSpec};
use spt_core::walker::{GaussianTrial, Harmonic};
use spt_core::{Langevin, LocalEnergySeries, Reptile};

fn symbolic(c: &mut Criterion) {
    let mut g = c.benchmark_group("symbolic");
    g.sample_size(10);
    for order in [6, 8] {
        g.bench_function(format!("epsilon_series/{order}"), |b| {
            b.iter(|| epsilon_series(black_box(order)).unwrap())
        });
    }
    g.finish();
}

fn spectral(c: &mut Criterion) {
    let series = epsilon_series(6).unwrap();
    let model = random_model(&RandomModelSpec::default(), &mut rng::stream(1, "bench", 0)).unwrap();
    c.bench_function("spectral/evaluate_series/6", |b| {
        b.iter(|| evaluate_series(black_box(&model), &series).unwrap())
    });
    c.bench_function("spectral/taylor_oracle/6", |b| {
        b.iter(|| taylor_oracle(black_box(&model), 6).unwrap())
    });
}

fn harmonic(epsilon: f64) -> Langevin<GaussianTrial, Harmonic> {
    Langevin::new(GaussianTrial::new(1.2).unwrap(), Harmonic, epsilon).unwrap()
}

fn sample(steps: usize) -> LocalEnergySeries {
    let walker = harmonic(0.01);
    let mut r = rng::stream(2, "bench", 0);
    walker
        .sample_series(walker.state_at(vec![0.0]), steps, 0, &mut r)
        .unwrap()
        .0
}

fn walker(c: &mut Criterion) {
    let walker = harmonic(0.01);
    let mut r = rng::stream(3, "bench", 0);
    let state = walker.state_at(vec![0.1]);
    c.bench_function("walker/advance/1000", |b| {
        b.iter(|| walker.advance(state.clone(), 1000, &mut r))
    });
}

fn estimators(c: &mut Criterion) {
    let series = sample(1 << 18);
    let grid: Vec<f64> = (1..=16).map(|i| i as f64 * 0.25).collect();
    c.bench_function("estimators/blocking/2^18", |b| {
        b.iter(|| blocking_analysis(black_box(series.samples())))
    });
    c.bench_function("estimators/autocovariance/2^18", |b| {
        b.iter(|| autocovariance(black_box(series.samples()), 1 << 16))
    });
    c.bench_function("estimators/action_moments/2^18", |b| {
        b.iter(|| action_moments(black_box(&series), &grid, 4).unwrap())
    });
}

fn reptation(c: &mut Criterion) {
    let space = harmonic(0.05);
    let mut r = rng::stream(4, "bench", 0);
    let reptile = Reptile::from_trajectory(&space, space.state_at(vec![0.0]), 101, &mut r).unwrap();
    c.bench_function("rqmc/sweep/101", |b| {
        b.iter_batched(
            || reptile.clone(),
            |mut rep| {
                for _ in 0..101 {
                    rep.step(&space, DirectionPolicy::Bounce, false, &mut r);
                }
                rep
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, symbolic, spectral, walker, estimators, reptation);
criterion_main!(benches);
