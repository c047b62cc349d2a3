mod common;

use gtnvf_core::features::{encode_bucket, FEATURE_NAMES, NUM_FEATURES};
use gtnvf_core::harness::synth::{stock_day_events, Latent};
use gtnvf_core::harness::SyntheticSpec;
use gtnvf_core::lob::{build_buckets, sample_quotes, sample_trades, BucketWindow, SampledDay, SymbolId};

#[test]
fn aggregators_match_brute_force() {
    for seed in 0..20 {
        let err = common::aggregator_oracle_error(seed, 1000);
        assert!(err < 1e-10, "seed {seed}: max abs error {err:.3e}");
    }
}

#[test]
fn feature_names_match_snapshot() {
    let snapshot = include_str!("data/feature_names.txt");
    let names: Vec<&str> = snapshot.lines().collect();
    assert_eq!(names, FEATURE_NAMES.to_vec());
}

#[test]
fn synthetic_buckets_encode_to_finite_rows() {
    let spec = SyntheticSpec {
        n_stocks: 4,
        n_sectors: 2,
        n_days: 2,
        supply_pairs: 1,
        ..SyntheticSpec::default()
    };
    let latent = Latent::new(&spec).unwrap();
    let (q, t) = stock_day_events(&spec, &latent, 1, 0);
    let day = SampledDay {
        date: spec.trading_days()[0],
        symbol: SymbolId(1),
        quotes: sample_quotes(&q).unwrap().0,
        trades: sample_trades(&t).unwrap().0,
    };
    let batch = build_buckets(&day, &spec.anchors, BucketWindow::symmetric(600)).unwrap();
    assert!(!batch.buckets.is_empty());
    for b in &batch.buckets {
        let f = encode_bucket(b).unwrap();
        assert_eq!(f.values.len(), NUM_FEATURES);
        assert!(f.values.iter().all(|v| v.is_finite()));
        assert_eq!(f.target, b.target);
    }
}

