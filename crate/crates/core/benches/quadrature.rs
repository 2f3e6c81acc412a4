use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tnk_core::chernweil::{integrate_ch2, QuadratureSpec, Resolution};
use tnk_core::geometry::{pontryagin_number, PontryaginOptions};
use tnk_core::index::{fuzz_equivalence, FuzzConfig};
use tnk_core::instanton::{InstantonBundle, LineBundle};
use tnk_core::{Exec, GhSpace};

fn modes() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)]
}

fn bench_ch2(c: &mut Criterion) {
    let space = GhSpace::new(1.0, &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
    let bundles = InstantonBundle::new(vec![LineBundle::new(0.4, vec![1, 2]).unwrap()]);
    let spec = QuadratureSpec {
        coarse: Resolution {
            radial: 4,
            n_theta: 8,
            n_phi: 16,
        },
        max_relative_error: 1.0,
        ..QuadratureSpec::default()
    };
    let mut g = c.benchmark_group("ch2");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| integrate_ch2(black_box(&space), &bundles, &spec, exec).unwrap().value)
        });
    }
    g.finish();
}

fn bench_pontryagin(c: &mut Criterion) {
    let space = GhSpace::new(1.0, &[[0.0, 0.0, 0.0], [1.0, 0.3, 0.0], [-0.4, 1.1, 0.5]]).unwrap();
    let mut g = c.benchmark_group("pontryagin");
    for (name, exec) in modes() {
        let opts = PontryaginOptions {
            exec,
            ..PontryaginOptions::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| pontryagin_number(black_box(&space), 1e-3, 100.0, opts).unwrap().value)
        });
    }
    g.finish();
}

fn bench_fuzz(c: &mut Criterion) {
    let cfg = FuzzConfig {
        cases: 2000,
        ..FuzzConfig::default()
    };
    let mut g = c.benchmark_group("index_fuzz");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| fuzz_equivalence(black_box(&cfg), exec).unwrap().mismatches.len())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_ch2, bench_pontryagin, bench_fuzz);
criterion_main!(benches);
