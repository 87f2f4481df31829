use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use kw_bench::{gaussian, small_benchmark, spd};
use kw_core::kernel::median_bandwidth;
use kw_core::linalg::sym_eig;
use kw_core::nystrom::batch_features;
use kw_core::{optimize_weights, train_run, HsicOptConfig, KernelConfig, Method, TrainConfig};

fn eig(c: &mut Criterion) {
    let mut group = c.benchmark_group("sym_eig");
    for n in [32, 64, 128] {
        let m = spd(n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| b.iter(|| sym_eig(black_box(m)).unwrap()));
    }
    group.finish();
}

fn features(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_features");
    let batch = gaussian(32, 32, 2);
    for m in [32, 96, 352] {
        let bank = gaussian(m, 32, 3);
        let cfg = KernelConfig::rbf(median_bandwidth(&bank, 0).unwrap()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &bank, |b, bank| {
            b.iter(|| batch_features(black_box(&batch), bank, &cfg, 1e-6).unwrap())
        });
    }
    group.finish();
}

fn weights(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimize_weights");
    for d in [64, 128] {
        let f = gaussian(32, d, 4);
        group.bench_with_input(BenchmarkId::from_parameter(d), &f, |b, f| {
            b.iter(|| optimize_weights(black_box(f), &HsicOptConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn epoch(c: &mut Criterion) {
    let data = small_benchmark(320);
    let mut group = c.benchmark_group("train_epoch");
    group.sample_size(10);
    for method in Method::ALL {
        let cfg = TrainConfig { method, epochs: 1, ..TrainConfig::default() };
        group.bench_function(method.to_string(), |b| b.iter(|| train_run(&cfg, &data).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, eig, features, weights, epoch);
criterion_main!(benches);
