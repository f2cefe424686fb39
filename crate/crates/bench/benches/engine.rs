use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use moea_portfolio::engine::{fast_nondominated_sort, spea2_assign_fitness, ObjectiveVector};
use moea_portfolio::phase2::{repair_weights_strategy1, repair_weights_strategy2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn population(n: usize, m: usize, seed: u64) -> Vec<ObjectiveVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| ObjectiveVector::new((0..m).map(|_| rng.random::<f64>()).collect()))
        .collect()
}

fn nondominated_sort(c: &mut Criterion) {
    let mut group = c.benchmark_group("nondominated_sort");
    for n in [100, 500, 1000] {
        let pop = population(n, 3, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &pop, |b, pop| {
            b.iter(|| fast_nondominated_sort(black_box(pop)))
        });
    }
    group.finish();
}

fn spea2_fitness(c: &mut Criterion) {
    let mut group = c.benchmark_group("spea2_fitness");
    for n in [100, 200] {
        let pop = population(n, 4, 2);
        let archive = population(n, 4, 3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &(pop, archive), |b, (p, a)| {
            b.iter(|| spea2_assign_fitness(black_box(p), black_box(a)))
        });
    }
    group.finish();
}

fn weight_repair(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut group = c.benchmark_group("weight_repair");
    for n in [25, 100, 250] {
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        group.bench_with_input(BenchmarkId::new("sparse", n), &w, |b, w| {
            b.iter(|| repair_weights_strategy1(black_box(w), 0.0035, 0.04))
        });
        group.bench_with_input(BenchmarkId::new("full", n), &w, |b, w| {
            b.iter(|| repair_weights_strategy2(black_box(w), 0.0035, 0.04))
        });
    }
    group.finish();
}

criterion_group!(benches, nondominated_sort, spea2_fitness, weight_repair);
criterion_main!(benches);
