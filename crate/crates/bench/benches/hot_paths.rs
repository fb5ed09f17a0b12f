//! Benchmarks for the code paths that dominate real runs: row softmax,
//! temperature fitting, score combination, sampling, and the exhaustive
//! combiner search.

use std::hint::black_box;

use calens_bench::{labeled_pair, labeled_scores, score_matrix};
use calens_core::calibration::fit_temperature;
use calens_core::ensemble::{build_calibrated_ensemble, combine, EnsembleConfig, EnsembleStrategy};
use calens_core::oracle::{check_prop1_exhaustive, fixture_corpus};
use calens_core::scores::softmax_rows;
use calens_core::synthetic::{sample_id, WorldSpec};
use criterion::{criterion_group, criterion_main, Criterion, Throughput};

const ROWS: usize = 10_000;
const CLASSES: usize = 10;

fn bench_softmax(c: &mut Criterion) {
    let scores = score_matrix(ROWS, CLASSES, 1);
    let mut g = c.benchmark_group("softmax_rows");
    g.throughput(Throughput::Elements(ROWS as u64));
    g.bench_function(format!("{ROWS}x{CLASSES}"), |b| {
        b.iter(|| softmax_rows(black_box(&scores)))
    });
    g.finish();
}

fn bench_fit_temperature(c: &mut Criterion) {
    let d = labeled_scores(ROWS, CLASSES, 2);
    c.bench_function("fit_temperature/10000x10", |b| {
        b.iter(|| fit_temperature(black_box(&d), 1e-6).unwrap())
    });
}

fn bench_combine(c: &mut Criterion) {
    let (d_std, d_rob) = labeled_pair(ROWS, CLASSES, 3);
    let calibrated =
        build_calibrated_ensemble(&d_std, &d_rob, EnsembleStrategy::CalibratedProbs)
            .unwrap()
            .config;
    let plain = EnsembleConfig::plain(EnsembleStrategy::Logits).unwrap();
    let (std, rob) = (d_std.scores, d_rob.scores);

    let mut g = c.benchmark_group("combine");
    g.throughput(Throughput::Elements(ROWS as u64));
    g.bench_function("logits", |b| {
        b.iter(|| combine(black_box(&std), black_box(&rob), &plain).unwrap())
    });
    g.bench_function("calibrated-probs", |b| {
        b.iter(|| combine(black_box(&std), black_box(&rob), &calibrated).unwrap())
    });
    g.finish();
}

fn bench_sample(c: &mut Criterion) {
    let world = WorldSpec::symmetric(5, 2.0, 1.2, 4).unwrap();
    let mut g = c.benchmark_group("sample_id");
    g.throughput(Throughput::Elements(ROWS as u64));
    g.bench_function("10000x5", |b| {
        b.iter(|| sample_id(black_box(&world), ROWS).unwrap())
    });
    g.finish();
}

fn bench_exhaustive(c: &mut Criterion) {
    let corpus = fixture_corpus();
    let (_, table) = corpus
        .iter()
        .find(|(name, _)| name == "k3-onehot")
        .expect("three-class fixture present");
    c.bench_function("exhaustive_combiners/9-cell-k3", |b| {
        b.iter(|| check_prop1_exhaustive(black_box(table)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_softmax,
    bench_fit_temperature,
    bench_combine,
    bench_sample,
    bench_exhaustive
);
criterion_main!(benches);
