use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use farsight_bench::textured_frame;
use farsight_core::turbsim::{covariance_matrix, degrade, psf_from_zernike, sample_field, TurbulenceConfig};

fn psf(c: &mut Criterion) {
    let cfg = TurbulenceConfig::with_strength(2.0, 1);
    let field = sample_field(&cfg, 1, 1).unwrap();
    let coeffs = field.coeffs_at(0, 0).to_vec();
    let mut g = c.benchmark_group("psf_from_zernike");
    for size in [9usize, 33] {
        g.bench_with_input(BenchmarkId::from_parameter(size), &size, |b, &size| {
            b.iter(|| psf_from_zernike(black_box(&coeffs), &cfg, size).unwrap())
        });
    }
    g.finish();
}

fn field(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample_field");
    for (w, h) in [(256u32, 256u32), (1920, 1080)] {
        let cfg = TurbulenceConfig::with_strength(2.0, 1);
        // warm the covariance and spatial caches
        sample_field(&cfg, w, h).unwrap();
        g.bench_function(format!("{w}x{h}"), |b| b.iter(|| sample_field(black_box(&cfg), w, h).unwrap()));
    }
    g.finish();
}

fn covariance(c: &mut Criterion) {
    covariance_matrix(36, 1.0).unwrap();
    c.bench_function("covariance_matrix/36 cached", |b| {
        b.iter(|| covariance_matrix(black_box(36), 2.0).unwrap())
    });
}

fn degradation(c: &mut Criterion) {
    let frame = textured_frame(256, 256);
    let cfg = TurbulenceConfig::with_strength(2.0, 3);
    let field = sample_field(&cfg, 256, 256).unwrap();
    let mut g = c.benchmark_group("degrade/256x256");
    g.sample_size(10);
    for size in [9usize, 33] {
        g.bench_with_input(BenchmarkId::new("psf", size), &size, |b, &size| {
            b.iter(|| degrade(black_box(&frame), &field, size).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, psf, field, covariance, degradation);
criterion_main!(benches);
