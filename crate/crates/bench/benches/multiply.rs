use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kcp_bench::{small, ucf11, Fixture};
use kcp_core::{multiply_naive, multiply_parallel, multiply_relaxed, multiply_strict};

fn paths(c: &mut Criterion, f: &Fixture, with_naive: bool) {
    let mut group = c.benchmark_group(&f.name);
    group.sample_size(20);
    if with_naive {
        group.bench_function("naive", |b| {
            b.iter(|| multiply_naive(black_box(&f.input), &f.weight).unwrap())
        });
    }
    group.bench_function("strict", |b| {
        b.iter(|| multiply_strict(black_box(&f.input), &f.weight).unwrap())
    });
    group.bench_function("relaxed", |b| {
        b.iter(|| multiply_relaxed(black_box(&f.input), &f.weight).unwrap())
    });
    for workers in [1, 4] {
        group.bench_with_input(BenchmarkId::new("parallel", workers), &workers, |b, &w| {
            b.iter(|| multiply_parallel(black_box(&f.input), &f.weight, w).unwrap())
        });
    }
    group.finish();
}

fn bench_small(c: &mut Criterion) {
    paths(c, &small(), true);
}

fn bench_ucf11(c: &mut Criterion) {
    for rank in [2, 4] {
        paths(c, &ucf11(rank), false);
    }
}

criterion_group!(benches, bench_small, bench_ucf11);
criterion_main!(benches);
