//! Monte Carlo throughput with rayon against the sequential fallback. The two produce
//! identical numbers; only the wall time differs.

use std::hint::black_box;

use affine_cs::affinend::{admissibility_nd, kn, FiducialND};
use affine_cs::par::McConfig;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn kn_routes(c: &mut Criterion) {
    let mut group = c.benchmark_group("kn_n3");
    group.sample_size(10);
    for samples in [50_000usize, 200_000] {
        let mc = McConfig::new(samples, 7);
        group.bench_with_input(BenchmarkId::new("auto", samples), &mc, |b, mc| {
            b.iter(|| kn(3, 1.0, black_box(mc)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", samples), &mc.sequential(), |b, mc| {
            b.iter(|| kn(3, 1.0, black_box(mc)).unwrap())
        });
    }
    group.finish();
}

fn admissibility(c: &mut Criterion) {
    let fid = FiducialND::new(2, 1.0, 1.0).unwrap();
    let mc = McConfig::new(200_000, 3);
    let mut group = c.benchmark_group("admissibility_n2");
    group.sample_size(10);
    group.bench_function("auto", |b| b.iter(|| admissibility_nd(&fid, black_box(&mc)).unwrap()));
    group.bench_function("sequential", |b| b.iter(|| admissibility_nd(&fid, black_box(&mc.sequential())).unwrap()));
    group.finish();
}

criterion_group!(benches, kn_routes, admissibility);
criterion_main!(benches);
