use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use evdom_core::{
    analyze, build_laplacian, check_uniform_semigroup_domination, expm, BoundaryCondition,
    TimeGrid, DEFAULT_EPS,
};

fn bench_expm(c: &mut Criterion) {
    let mut group = c.benchmark_group("expm");
    for n in [64, 128, 256] {
        let op = build_laplacian(BoundaryCondition::Neumann, None, n).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &op, |b, op| {
            b.iter(|| expm(op, black_box(1.0)).unwrap())
        });
    }
    group.finish();
}

fn bench_analyze(c: &mut Criterion) {
    let mut group = c.benchmark_group("analyze");
    group.sample_size(10);
    for (label, bc) in [
        ("symmetric", BoundaryCondition::Neumann),
        ("general", BoundaryCondition::NonlocalBeta(-0.25)),
    ] {
        for n in [128, 400] {
            group.bench_with_input(BenchmarkId::new(label, n), &n, |b, &n| {
                // analyze caches per handle, so build a fresh one each iteration.
                b.iter(|| {
                    let op = build_laplacian(bc, None, n).unwrap();
                    analyze(&op).unwrap().spectral_bound
                })
            });
        }
    }
    group.finish();
}

fn bench_uniform_check(c: &mut Criterion) {
    let mut group = c.benchmark_group("uniform_check");
    group.sample_size(10);
    let d = build_laplacian(BoundaryCondition::Dirichlet, None, 62).unwrap();
    let nl = build_laplacian(BoundaryCondition::NonlocalSymmetric, None, 64).unwrap();
    let grid = TimeGrid::log(0.01, 50.0, 200).unwrap();
    group.bench_function("dirichlet_vs_nonlocal_n64", |b| {
        b.iter(|| check_uniform_semigroup_domination(&d, &nl, &grid, DEFAULT_EPS).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_expm, bench_analyze, bench_uniform_check);
criterion_main!(benches);
