use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bernsched::dp_exact::solve_exact;
use bernsched::dp_stratified::{solve_stratified_rounded, StratOptions};
use bernsched::instance::build_groups;
use bernsched::policy::sept_policy;
use bernsched::simulate::{expected_cost_exact, expected_cost_mc};
use bernsched::timegrid::build_grid;
use bernsched::Rational;
use bernsched_bench::{two_types, uniform};

fn exact(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_exact");
    for per_type in [2, 3, 4] {
        let inst = two_types(2, per_type);
        g.bench_with_input(BenchmarkId::from_parameter(2 * per_type), &inst, |b, inst| {
            b.iter(|| solve_exact(black_box(inst)).unwrap().value)
        });
    }
    g.finish();
}

fn stratified(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_stratified");
    for per_type in [2, 3, 4] {
        let inst = two_types(2, per_type);
        g.bench_with_input(BenchmarkId::from_parameter(2 * per_type), &inst, |b, inst| {
            b.iter(|| {
                solve_stratified_rounded(black_box(inst), StratOptions::default())
                    .unwrap()
                    .solution
                    .value
            })
        });
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let inst = uniform(3, 13, 7, 0.4, 10);
    let sept = sept_policy(&inst);
    c.bench_function("enumerate_sept_10_jobs", |b| {
        b.iter(|| expected_cost_exact(black_box(&sept), &inst).unwrap())
    });
    c.bench_function("mc_sept_10k_trials", |b| {
        b.iter(|| expected_cost_mc(black_box(&sept), &inst, 10_000, 1).unwrap().mean)
    });
}

fn grid(c: &mut Criterion) {
    let inst = two_types(1, 1);
    let grid = build_grid(&inst, &build_groups(&inst)).unwrap();
    let probes: Vec<Rational> = (0..256u64)
        .map(|i| &Rational::from_int(i * 7919) / &Rational::from_int(13))
        .collect();
    c.bench_function("q_successor_256_probes", |b| {
        b.iter(|| {
            probes
                .iter()
                .map(|t| grid.q_successor(1, black_box(t)))
                .filter(|s| s.is_integer())
                .count()
        })
    });
}

criterion_group!(benches, exact, stratified, simulation, grid);
criterion_main!(benches);
