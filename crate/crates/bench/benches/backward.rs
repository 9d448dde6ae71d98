use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use matsqrt_bench::{inputs, DIMS};
use matsqrt_core::backward::{bartels_stewart, ns_sqrt_gradient, sqrt_lyapunov_gradient};
use matsqrt_core::{exact_sqrt_eig, ns_sqrt_coupled_traced};

fn backward(c: &mut Criterion) {
    let mut group = c.benchmark_group("backward");
    for n in DIMS {
        let (batch, g) = inputs(n, 1);
        let a = &batch[0];
        let root = exact_sqrt_eig(a).unwrap().value;
        let traced = ns_sqrt_coupled_traced(a, 5).unwrap();
        group.bench_with_input(BenchmarkId::new("lyapunov(8)", n), &root, |b, s| {
            b.iter(|| sqrt_lyapunov_gradient(black_box(s), &g, 8, 0.0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("ns(5)", n), &traced, |b, t| {
            b.iter(|| ns_sqrt_gradient(a, black_box(t), &g).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("bartels_stewart", n), &root, |b, s| {
            b.iter(|| bartels_stewart(black_box(s), &g).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, backward);
criterion_main!(benches);
