use pnd_core::eval::{run_experiment, ExperimentConfig};
use pnd_core::features::{compute_features, read_feature_csv, FeatureRow, WindowConfig};
use pnd_core::ingest::{chunkize, label_chunks, parse_events, parse_trades};
use pnd_core::learners::ModelKind;
use pnd_core::synth::{
    build_benchmark, generate, make_benchmark, BenchmarkConfig, EventSpec, Manifest, SynthConfig,
};

fn p99(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(v.len() as f64 * 0.99) as usize]
}

/// Event rows must stand above the 99th percentile of rows whose full 7 h
/// window holds no pump trade.
#[test]
fn event_rows_stand_out() {
    let window = WindowConfig::default();
    let win_ms = window.window_chunks() as i64 * 25_000;
    for seed in 0..10 {
        let events: Vec<EventSpec> = (0..4)
            .map(|k| EventSpec {
                start_offset_s: 30_000.0 + k as f64 * 40_000.0,
                ..EventSpec::default()
            })
            .collect();
        let cfg = SynthConfig {
            duration_days: 2.0,
            events: events.clone(),
            seed,
            ..SynthConfig::default()
        };
        let (trades, ev) = generate(&cfg).unwrap();
        let chunks = label_chunks(&chunkize(&trades, 25).unwrap(), &ev).unwrap();
        let rows = compute_features(&chunks, &window).unwrap().rows;
        let t0 = chunks[0].start_ms;
        let clean = |r: &FeatureRow| {
            r.label == 0
                && r.start_ms - t0 >= win_ms
                && events.iter().all(|e| {
                    let s = t0 + (e.start_offset_s * 1000.0) as i64;
                    let end = s + (e.pump_duration_s * 1000.0) as i64;
                    r.start_ms + 25_000 <= s || r.start_ms - win_ms >= end
                })
        };
        let base: Vec<&FeatureRow> = rows.iter().filter(|r| clean(r)).collect();
        let vol = p99(base.iter().map(|r| r.AvgVolumes).collect());
        let rush = p99(base.iter().map(|r| r.AvgRushOrders).collect());
        let hits: Vec<&FeatureRow> = rows.iter().filter(|r| r.label == 1).collect();
        assert_eq!(hits.len(), 4);
        for r in hits {
            assert!(r.AvgVolumes > vol, "seed {seed}: {} <= {vol}", r.AvgVolumes);
            assert!(
                r.AvgRushOrders > rush,
                "seed {seed}: {} <= {rush}",
                r.AvgRushOrders
            );
        }
    }
}

#[test]
fn benchmark_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let bc = BenchmarkConfig {
        n_streams: 2,
        days_per_stream: 1.0,
        events_per_stream: 3,
        seed: 7,
        ..BenchmarkConfig::default()
    };
    let (manifest, path) = make_benchmark(&bc, dir.path()).unwrap();
    assert_eq!(Manifest::read(&path).unwrap(), manifest);
    assert_eq!(manifest.n_pos, 6);

    let bench = build_benchmark(&bc).unwrap();
    for (files, stream) in manifest.streams.iter().zip(&bench.streams) {
        let trades =
            parse_trades(std::fs::File::open(dir.path().join(&files.trades)).unwrap()).unwrap();
        let events =
            parse_events(std::fs::File::open(dir.path().join(&files.events)).unwrap()).unwrap();
        assert_eq!(trades, stream.trades);
        assert_eq!(events, stream.events);
        // re-featurizing the written trades reproduces the written features
        let chunks = label_chunks(&chunkize(&trades, 25).unwrap(), &events).unwrap();
        let rows = compute_features(&chunks, &bc.window).unwrap().rows;
        let written =
            read_feature_csv(std::fs::File::open(dir.path().join(&files.features)).unwrap())
                .unwrap();
        assert_eq!(rows, written);
    }

    let cfg = ExperimentConfig {
        models: vec![ModelKind::Lgbm],
        ..ExperimentConfig::default()
    };
    let a = run_experiment(&dir.path().join(&manifest.features), &cfg).unwrap();
    let b = run_experiment(&dir.path().join(&manifest.features), &cfg).unwrap();
    assert_eq!(a.reports.len(), 2);
    for (x, y) in a.reports.iter().zip(&b.reports) {
        assert_eq!(x.confusion, y.confusion);
    }
}
