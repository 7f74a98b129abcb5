use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use wfp_bench::{points, strengths};
use wfp_core::nufft::{nudft1_direct, NufftPlan};

fn transforms(c: &mut Criterion) {
    let mut g = c.benchmark_group("type1");
    for &n in &[100usize, 1000, 10000] {
        let pts = points(n, 1);
        let s = strengths(n, 2);
        let plan = NufftPlan::new(&pts, 1000, 1e-12);
        g.bench_with_input(BenchmarkId::new("fast", n), &n, |b, _| {
            b.iter(|| plan.type1(black_box(&s)))
        });
        if n <= 1000 {
            g.bench_with_input(BenchmarkId::new("direct", n), &n, |b, _| {
                b.iter(|| nudft1_direct(black_box(&pts), black_box(&s), 1000))
            });
        }
    }
    g.finish();

    let pts = points(1000, 3);
    let plan = NufftPlan::new(&pts, 1000, 1e-12);
    let modes = plan.type1(&strengths(1000, 4));
    c.bench_function("type2/fast/1000", |b| b.iter(|| plan.type2(black_box(&modes))));
}

criterion_group!(benches, transforms);
criterion_main!(benches);
