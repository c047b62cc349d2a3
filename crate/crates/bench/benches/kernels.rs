use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gtnvf_core::features::{aggregate, Aggregator, Windowed};
use gtnvf_core::graph::{cross_fc_edges, temporal_fc_edges, FeatureGrid, Graph, KnnScope, NodeSpace};
use gtnvf_core::model::{sample_blocks, GraphInputs, GtnConfig, GtnModel, Tape};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn aggregators(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let values: Vec<f64> = (0..600).map(|_| rng.random_range(-1.0..1.0)).collect();
    let offsets: Vec<u32> = (0..600).collect();
    let mut group = c.benchmark_group("aggregate_600");
    for agg in [Aggregator::Mean, Aggregator::Gini, Aggregator::Iqr, Aggregator::MedianDeviation] {
        group.bench_function(agg.name(), |b| b.iter(|| aggregate(black_box(&values), agg)));
    }
    let w = Windowed::new(&values, &offsets, 600);
    group.bench_function("progressive_rv", |b| {
        b.iter(|| black_box(w).progressive(Aggregator::RealizedVolatility).unwrap())
    });
    group.finish();
}

fn knn_edges(c: &mut Criterion) {
    let mut group = c.benchmark_group("knn_edges");
    group.sample_size(10);
    for (n, days) in [(30usize, 60usize), (100, 60)] {
        let m = days * 6;
        let start = chrono::NaiveDate::from_ymd_opt(2021, 1, 4).unwrap();
        let times = (0..m)
            .map(|t| (start + chrono::Days::new((t / 6) as u64), 1800 + 3600 * (t % 6) as u32))
            .collect();
        let space = NodeSpace::dense(n, times);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grid = FeatureGrid::from_values(&space, (0..n * m).map(|_| rng.random_range(1.0..2.0)).collect()).unwrap();
        group.bench_with_input(BenchmarkId::new("temporal", format!("{n}x{m}")), &grid, |b, g| {
            b.iter(|| temporal_fc_edges(g, 2, KnnScope::All).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("cross", format!("{n}x{m}")), &grid, |b, g| {
            b.iter(|| cross_fc_edges(g, 2, KnnScope::All).unwrap())
        });
    }
    group.finish();
}

fn gtn_step(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 2000;
    let mut edges = Vec::new();
    for d in 0..n as u32 {
        for _ in 0..20 {
            edges.push((rng.random_range(0..n as u32), d));
        }
    }
    let inputs = GraphInputs {
        graph: Graph::from_edges(n, edges),
        features: Array2::from_shape_fn((n, 73), |_| rng.random_range(-1.0..1.0)),
        symbols: (0..n as u32).map(|i| i % 30).collect(),
    };
    let config = GtnConfig {
        layers: 2,
        heads: 4,
        channels: 32,
        k_cat: 8,
        fanout: 10,
        ..GtnConfig::default()
    };
    let model = GtnModel::new(config, 30, 73, 1e-3).unwrap();
    let targets: Vec<u32> = (0..256).map(|i| i * 7).collect();
    let truth = std::rc::Rc::new(vec![1e-3; targets.len()]);
    c.bench_function("gtn_forward_backward_256", |b| {
        b.iter(|| {
            let batch = sample_blocks(&inputs.graph, &targets, 2, Some(10), &mut rng);
            let mut tape = Tape::new();
            let y = model.forward_batch(&mut tape, &inputs, &batch).unwrap();
            let loss = tape.rmspe(y, truth.clone(), 1e-8).unwrap();
            tape.backward(loss, &model.params).unwrap()
        })
    });
}

criterion_group!(benches, aggregators, knn_edges, gtn_step);
criterion_main!(benches);
