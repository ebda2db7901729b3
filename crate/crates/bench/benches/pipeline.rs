use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use weanpred_bench::{jittered_series, two_class_rows};
use weanpred_core::features::FrameFeatures;
use weanpred_core::nudft::{nudft, spectrogram, FrequencyGrid, SpectrogramConfig};
use weanpred_core::select::mann_whitney;
use weanpred_core::svm::{balanced_class_weights, train, KernelSpec, SmoConfig};

fn bench_nudft(c: &mut Criterion) {
    let mut group = c.benchmark_group("nudft");
    for n in [64, 256, 1024] {
        let series = jittered_series(n);
        let grid = FrequencyGrid::new(0.5 / 128.0, 128).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &series, |b, s| {
            b.iter(|| nudft(black_box(s), &grid, None).unwrap())
        });
    }
    group.finish();
}

fn bench_spectrogram(c: &mut Criterion) {
    let series = jittered_series(900);
    let cfg = SpectrogramConfig::default();
    c.bench_function("spectrogram_900s", |b| {
        b.iter(|| spectrogram(black_box(&series), &cfg).unwrap())
    });
    let frames = spectrogram(&series, &cfg).unwrap();
    c.bench_function("frame_features", |b| {
        b.iter(|| FrameFeatures::compute(black_box(&frames[0].spectrum)).unwrap())
    });
}

fn bench_smo(c: &mut Criterion) {
    let mut group = c.benchmark_group("smo_rbf");
    for n in [50, 115] {
        let (rows, labels) = two_class_rows(n, 18);
        let weights = balanced_class_weights(&labels).unwrap();
        let spec = KernelSpec::rbf(1.0, 4.0);
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| train(black_box(&rows), &labels, &spec, weights, &SmoConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn bench_mann_whitney(c: &mut Criterion) {
    let (rows, labels) = two_class_rows(154, 1);
    let (a, b): (Vec<f64>, Vec<f64>) = {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (r, l) in rows.iter().zip(&labels) {
            if l.is_positive() {
                b.push(r[0])
            } else {
                a.push(r[0])
            }
        }
        (a, b)
    };
    c.bench_function("mann_whitney_94_60", |bch| {
        bch.iter(|| mann_whitney(black_box(&a), black_box(&b)).unwrap())
    });
    c.bench_function("mann_whitney_exact_10_10", |bch| {
        bch.iter(|| mann_whitney(black_box(&a[..10]), black_box(&b[..10])).unwrap())
    });
}

criterion_group!(benches, bench_nudft, bench_spectrogram, bench_smo, bench_mann_whitney);
criterion_main!(benches);
