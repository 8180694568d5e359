use std::sync::Arc;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rfdis::dcs::{DcsModel, PoolParams};
use rfdis::dissim::{build_matrix, kdn_hardness, Measure, Rows};
use rfdis::{DcsConfig, ForestParams, RandomForest};
use rfdis_bench::{relevance, single_view, spaces};

fn forest_training(c: &mut Criterion) {
    let mut group = c.benchmark_group("forest_train");
    group.sample_size(10);
    for n in [200, 400] {
        let data = single_view(n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, data| {
            b.iter(|| RandomForest::train(Arc::clone(data), ForestParams::sqrt_mtry(128, data.n_features(), 7)).unwrap())
        });
    }
    group.finish();
}

fn dissimilarities(c: &mut Criterion) {
    let data = single_view(200, 2);
    let forest = RandomForest::train(Arc::clone(&data), ForestParams::sqrt_mtry(128, data.n_features(), 7)).unwrap();
    let hardness = kdn_hardness(&forest, 5).unwrap();
    let mut group = c.benchmark_group("dissimilarity");
    group.sample_size(10);
    group.bench_function("hardness", |b| b.iter(|| kdn_hardness(black_box(&forest), 5).unwrap()));
    group.bench_function("plain_matrix", |b| b.iter(|| build_matrix(&forest, Rows::Training, Measure::Plain).unwrap()));
    group.bench_function("rfd_matrix", |b| {
        b.iter(|| build_matrix(&forest, Rows::Training, Measure::Rfd(&hardness)).unwrap())
    });
    group.finish();
}

fn selection(c: &mut Criterion) {
    let spaces = spaces(200, 64, 3);
    let model = DcsModel::fit(Arc::clone(&spaces), PoolParams::default(), DcsConfig::default()).unwrap();
    let test = relevance(40, 4);
    let mut group = c.benchmark_group("dcs");
    group.sample_size(10);
    group.bench_function("pool", |b| {
        b.iter(|| DcsModel::fit(Arc::clone(&spaces), PoolParams::default(), DcsConfig::default()).unwrap())
    });
    group.bench_function("predict_40", |b| b.iter(|| model.predict_dataset(black_box(&test)).unwrap()));
    group.finish();
}

criterion_group!(benches, forest_training, dissimilarities, selection);
criterion_main!(benches);
