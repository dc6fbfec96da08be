use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fspde_core::chaos::exact_cumulants_from_table;
use fspde_core::fgn::FgnSampler;
use fspde_core::rng::substream;
use fspde_core::simulate::{ExactPathSampler, StationarySequenceSampler};
use fspde_core::spectral_model::{build_distributed_model, build_pointwise_model};
use fspde_core::{EmbeddingPolicy, InitKind, LagTable, TrajectoryGrid};

fn fgn(c: &mut Criterion) {
    let mut group = c.benchmark_group("fgn_pair");
    for n in [1 << 10, 1 << 14] {
        let sampler = FgnSampler::new(n, 0.7).unwrap();
        let mut rng = substream(1, 0, 0);
        let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| {
                sampler.sample_pair(&mut rng, 1.0, &mut a, &mut b);
                black_box(a[0] + b[0])
            })
        });
    }
    group.finish();
}

fn autocov(c: &mut Criterion) {
    let mut group = c.benchmark_group("lag_table");
    for h in [0.3, 0.7] {
        let model = build_distributed_model(1, 1, 16, 1.0, h, None).unwrap();
        group.bench_with_input(BenchmarkId::new("heat16_256_lags", h), &model, |bench, m| {
            bench.iter(|| black_box(LagTable::build(m, 1.0, 256).unwrap().len()))
        });
    }
    let pointwise = build_pointwise_model(0.5, 8, 1.0, 0.7).unwrap();
    group.bench_function("pointwise8_256_lags", |bench| {
        bench.iter(|| black_box(LagTable::build(&pointwise, 1.0, 256).unwrap().len()))
    });
    group.finish();
}

fn stationary(c: &mut Criterion) {
    let mut group = c.benchmark_group("stationary_pair");
    let heat = build_distributed_model(1, 1, 8, 1.0, 0.6, None).unwrap();
    let seq = StationarySequenceSampler::new(&heat, 1024, 1.0, EmbeddingPolicy::default()).unwrap();
    let (mut a, mut b) = (vec![0.0; 1024 * 8], vec![0.0; 1024 * 8]);
    let mut rng = substream(2, 0, 0);
    group.bench_function("heat8_n1024", |bench| {
        bench.iter(|| {
            seq.sample_pair(&mut rng, &mut a, &mut b);
            black_box(a[0] + b[0])
        })
    });
    let pointwise = build_pointwise_model(0.5, 4, 1.0, 0.7).unwrap();
    let grid = TrajectoryGrid::new(0.5, 511).unwrap();
    let path = ExactPathSampler::new(&pointwise, &grid, &InitKind::Stationary, EmbeddingPolicy::default()).unwrap();
    group.bench_function("pointwise4_path_n512", |bench| {
        bench.iter(|| black_box(path.sample_pair(&mut rng).0.len()))
    });
    group.finish();
}

fn cumulants(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_cumulants");
    group.sample_size(10);
    let model = build_distributed_model(1, 1, 4, 0.1, 0.7, None).unwrap();
    let table = LagTable::build(&model, 1.0, 512).unwrap();
    for n in [64, 256] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, &n| {
            bench.iter(|| black_box(exact_cumulants_from_table(&table, n).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, fgn, autocov, stationary, cumulants);
criterion_main!(benches);
