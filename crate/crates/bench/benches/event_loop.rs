use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use spinsim_core::devices::{spin_flip, Analyzer, AnalyzerConfig};
use spinsim_core::experiments::{run_filtering_triple, run_setting_pair};
use spinsim_core::rng::UniformStream;
use spinsim_core::{
    AnalyzerMode, AnalyzerModel, FilteringTripleConfig, MagneticMoment, Message, Sign,
    UncertaintyRunConfig, Vec3,
};

fn bench_devices(c: &mut Criterion) {
    let msg = Message::new(0.3, 0.1, 1.1).unwrap();
    c.bench_function("spin_flip", |b| b.iter(|| spin_flip(black_box(&msg))));

    let cfg = AnalyzerConfig::new(
        Vec3::Z,
        Sign::Plus,
        AnalyzerModel::Probabilistic,
        AnalyzerMode::Absorbing,
    )
    .unwrap();
    let mut analyzer = Analyzer::new(cfg, UniformStream::new(1));
    c.bench_function("analyzer_probabilistic", |b| {
        b.iter(|| analyzer.process(black_box(&msg)))
    });

    let cfg = AnalyzerConfig::new(
        Vec3::Z,
        Sign::Plus,
        AnalyzerModel::Dlm { gamma: 0.999 },
        AnalyzerMode::Absorbing,
    )
    .unwrap();
    let mut analyzer = Analyzer::new(cfg, UniformStream::new(1));
    c.bench_function("analyzer_dlm", |b| {
        b.iter(|| analyzer.process(black_box(&msg)))
    });
}

fn bench_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("runs");
    group.sample_size(20);
    for model in [
        AnalyzerModel::Probabilistic,
        AnalyzerModel::Dlm { gamma: 0.999 },
    ] {
        let cfg = UncertaintyRunConfig::new(vec![0.7], 10_000, model, 42);
        group.bench_function(format!("setting_pair_10k_{}", model.name()), |b| {
            b.iter(|| run_setting_pair(&cfg, MagneticMoment::X, 0.7, Sign::Plus, Sign::Minus))
        });
    }
    let triple = FilteringTripleConfig::master(
        MagneticMoment::X,
        0.7,
        10_000,
        AnalyzerModel::Probabilistic,
        42,
    );
    group.bench_function("filtering_triple_10k", |b| {
        b.iter(|| run_filtering_triple(&triple).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_devices, bench_runs);
criterion_main!(benches);
