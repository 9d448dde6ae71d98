use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use matsqrt_bench::{inputs, methods, DIMS};
use matsqrt_core::{mpa_invsqrt, sqrt_with};

fn forward_by_dim(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward");
    for n in DIMS {
        let (batch, _) = inputs(n, 1);
        for m in methods() {
            group.bench_with_input(BenchmarkId::new(m.to_string(), n), &batch[0], |b, a| {
                b.iter(|| sqrt_with(m, black_box(a)).unwrap())
            });
        }
    }
    group.finish();
}

fn forward_by_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_batch");
    for size in [1, 4, 16] {
        let (batch, _) = inputs(64, size);
        for m in methods() {
            group.bench_with_input(BenchmarkId::new(m.to_string(), size), &batch, |b, batch| {
                b.iter(|| batch.iter().map(|a| sqrt_with(m, black_box(a)).unwrap()).count())
            });
        }
    }
    group.finish();
}

fn inverse(c: &mut Criterion) {
    let (batch, _) = inputs(64, 1);
    c.bench_function("mpa_invsqrt/64", |b| b.iter(|| mpa_invsqrt(black_box(&batch[0]), 5, 5).unwrap()));
}

criterion_group!(benches, forward_by_dim, forward_by_batch, inverse);
criterion_main!(benches);
