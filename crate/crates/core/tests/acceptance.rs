//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; the process exits non-zero if
//! any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{dataset_bytes, imbalanced, oracle_cart, random_dataset};
use pnd_core::eval::{f1_score, run_experiment_on, stratified_split, ExperimentConfig, Variant};
use pnd_core::features::{compute_features, write_feature_csv, WindowConfig};
use pnd_core::ingest::{chunkize, label_chunks, write_trades, PumpEvent, TradeRecord};
use pnd_core::learners::objective::{grad_hess, logistic_loss};
use pnd_core::learners::{
    train, train_cart, train_gbm, train_lgbm, train_xgb, ModelKind, TrainParams,
};
use pnd_core::resample::{smote, SmoteConfig};
use pnd_core::rng::rng_for;
use pnd_core::synth::{build_benchmark, generate, BenchmarkConfig, EventSpec, SynthConfig};
use rand::Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

// precision, recall, printed F1
const REPORTED: [(&str, f64, f64, f64); 10] = [
    ("RF original", 98.57, 88.46, 93.24),
    ("RF smote", 89.02, 93.59, 91.25),
    ("AdaBoost original", 92.11, 86.42, 89.17),
    ("AdaBoost smote", 86.90, 90.12, 88.48),
    ("GBM original", 92.11, 86.42, 89.17),
    ("GBM smote", 82.02, 90.12, 85.88),
    ("XGBoost original", 86.84, 84.62, 85.71),
    ("XGBoost smote", 82.22, 94.87, 88.10),
    ("LightGBM original", 77.38, 83.33, 80.25),
    ("LightGBM smote", 83.91, 93.59, 88.48),
];

fn c1_f1_arithmetic() -> Outcome {
    let mut worst = 0.0f64;
    for (name, p, r, f1) in REPORTED {
        let got = f1_score(Some(p), Some(r)).ok_or(format!("{name}: F1 undefined"))?;
        let err = (got - f1).abs();
        ensure!(err <= 0.01, "{name}: F1 {got:.4} vs printed {f1}");
        worst = worst.max(err);
    }
    Ok(format!("10 rows, max |ΔF1| = {worst:.4}"))
}

fn c2_smote_counts() -> Outcome {
    let d = imbalanced(2, 222, 337_287);
    ensure!(
        d.n_pos() == 222 && d.n_neg() == 337_287,
        "fixture has {}/{}",
        d.n_pos(),
        d.n_neg()
    );
    let cfg = SmoteConfig {
        seed: 5,
        ..SmoteConfig::default()
    };
    let out = smote(&d, &cfg).map_err(|e| e.to_string())?;
    ensure!(
        out.n_pos() == 337_287,
        "{} positives after SMOTE",
        out.n_pos()
    );
    ensure!(
        out.n_neg() == 337_287,
        "{} negatives after SMOTE",
        out.n_neg()
    );
    for i in (0..d.n_rows()).filter(|&i| d.labels()[i] == 0) {
        ensure!(
            d.features().row(i) == out.features().row(i) && out.labels()[i] == 0,
            "negative row {i} changed"
        );
        ensure!(
            d.row_hash(i) == out.row_hash(i),
            "negative row {i} hash changed"
        );
    }
    Ok(format!(
        "222 → {} positives, 337287 negatives untouched",
        out.n_pos()
    ))
}

fn c3_split_counts() -> Outcome {
    let d = imbalanced(3, 317, 481_840);
    let (tr, te) = stratified_split(&d, 0.7, 42).map_err(|e| e.to_string())?;
    ensure!(
        tr.n_pos() == 222 && te.n_pos() == 95,
        "positives split {}/{}",
        tr.n_pos(),
        te.n_pos()
    );
    let (tr2, te2) = stratified_split(&d, 0.7, 42).map_err(|e| e.to_string())?;
    ensure!(
        tr.digest() == tr2.digest() && te.digest() == te2.digest(),
        "split not deterministic"
    );
    Ok(format!(
        "positives 222/95, negatives {}/{}, deterministic",
        tr.n_neg(),
        te.n_neg()
    ))
}

fn reduced_benchmark(seed: u64) -> BenchmarkConfig {
    BenchmarkConfig {
        n_streams: 10,
        days_per_stream: 1.5,
        events_per_stream: 4,
        seed,
        ..BenchmarkConfig::default()
    }
}

fn c4_smote_improves_recall() -> Outcome {
    // pooled (tp, fn) per kind and variant over the seeds
    let mut pooled = [[(0u64, 0u64); 2]; 5];
    let mut rows = 0;
    for seed in 0..3 {
        let bench = build_benchmark(&reduced_benchmark(seed)).map_err(|e| e.to_string())?;
        ensure!(
            bench.achieved_imbalance() >= 500.0,
            "seed {seed}: imbalance {:.0}:1",
            bench.achieved_imbalance()
        );
        ensure!(
            bench.n_pos >= 30,
            "seed {seed}: {} positive events",
            bench.n_pos
        );
        let data = bench.dataset().map_err(|e| e.to_string())?;
        rows = data.n_rows();
        let cfg = ExperimentConfig {
            seed,
            ..ExperimentConfig::default()
        };
        let res = run_experiment_on(&data, &cfg).map_err(|e| e.to_string())?;
        for rep in &res.reports {
            let k = ModelKind::ALL.iter().position(|&m| m == rep.model).unwrap();
            let v = usize::from(rep.variant == Variant::Smote);
            pooled[k][v].0 += rep.confusion.tp;
            pooled[k][v].1 += rep.confusion.fn_;
        }
    }
    let recall = |(tp, fn_): (u64, u64)| 100.0 * tp as f64 / (tp + fn_).max(1) as f64;
    let mut detail = Vec::new();
    let mut big_gains = 0;
    for (k, kind) in ModelKind::ALL.iter().enumerate() {
        let (orig, sm) = (recall(pooled[k][0]), recall(pooled[k][1]));
        ensure!(
            sm >= orig,
            "{kind}: SMOTE recall {sm:.2} < original {orig:.2}"
        );
        if sm - orig >= 3.0 {
            big_gains += 1;
        }
        detail.push(format!("{} {orig:.1}→{sm:.1}", kind.short_name()));
    }
    ensure!(
        big_gains >= 3,
        "only {big_gains} kinds gain ≥ 3 points: {}",
        detail.join(", ")
    );
    Ok(format!(
        "~{rows} rows/seed, pooled recall over 3 seeds: {}",
        detail.join(", ")
    ))
}

fn c5_cart_oracle() -> Outcome {
    let mut rng = rng_for(5, 0);
    let mut splits = 0;
    for i in 0..50 {
        let n = rng.random_range(10..=200);
        let p = rng.random_range(1..=5);
        let d = random_dataset(500 + i, n, p, i % 2 == 0);
        let params = TrainParams {
            max_depth: rng.random_range(1..=8),
            min_samples_leaf: rng.random_range(1..=5),
            ..TrainParams::default()
        };
        let got = train_cart(&d, &vec![1.0; n], &params).map_err(|e| e.to_string())?;
        let rows: Vec<usize> = (0..n).collect();
        let want = oracle_cart(&d, &rows, 0, params.max_depth, params.min_samples_leaf);
        ensure!(
            got == want,
            "dataset {i} ({n}×{p}): splits {:?} vs oracle {:?}",
            got.splits(),
            want.splits()
        );
        splits += got.splits().len();
    }
    Ok(format!(
        "50 datasets, {splits} splits identical to exhaustive search"
    ))
}

fn c6_gradient_check() -> Outcome {
    let mut rng = rng_for(6, 0);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let s: f64 = rng.random_range(-10.0..10.0);
        let y = f64::from(u8::from(i % 2 == 0));
        let l = |x: f64| logistic_loss(x, y);
        let d1 = |h: f64| (l(s + h) - l(s - h)) / (2.0 * h);
        let d2 = |h: f64| (l(s + h) - 2.0 * l(s) + l(s - h)) / (h * h);
        // Richardson extrapolation cancels the O(h^2) term of both stencils
        let g_fd = (4.0 * d1(0.01) - d1(0.02)) / 3.0;
        let h_fd = (4.0 * d2(0.01) - d2(0.02)) / 3.0;
        let (g, h) = grad_hess(s, y);
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
        let e = rel(g, g_fd).max(rel(h, h_fd));
        ensure!(
            e <= 1e-5,
            "score {s}, y {y}: g {g} vs {g_fd}, h {h} vs {h_fd}"
        );
        worst = worst.max(e);
    }
    Ok(format!("100 scores, max relative error {worst:.2e}"))
}

fn c7_histogram_matches_exact() -> Outcome {
    let mut rng = rng_for(7, 0);
    let mut split_roots = 0;
    for i in 0..20 {
        let n = rng.random_range(30..=200);
        let p = rng.random_range(1..=5);
        let d = random_dataset(700 + i, n, p, i % 2 == 1);
        let params = TrainParams {
            n_trees: 1,
            max_leaves: 2,
            n_bins: 255,
            ..TrainParams::default()
        };
        let x = train_xgb(&d, &params).map_err(|e| e.to_string())?;
        let l = train_lgbm(&d, &params).map_err(|e| e.to_string())?;
        let (rx, rl) = (x.trees[0].splits(), l.trees[0].splits());
        ensure!(
            rx.first() == rl.first(),
            "dataset {i} ({n}×{p}): xgb root {:?} vs lgbm root {:?}",
            rx.first(),
            rl.first()
        );
        split_roots += usize::from(!rl.is_empty());
    }
    ensure!(split_roots > 0, "no dataset produced a root split");
    Ok(format!("20 datasets, {split_roots} root splits identical"))
}

fn c8_training_speed() -> Outcome {
    let d = random_dataset(8, 100_000, 9, false);
    let params = TrainParams::default();
    let time = |f: &dyn Fn() -> pnd_core::Result<pnd_core::learners::EnsembleModel>| {
        let t = Instant::now();
        f().map(|_| t.elapsed().as_secs_f64())
    };
    let lgbm = time(&|| train_lgbm(&d, &params)).map_err(|e| e.to_string())?;
    let xgb = time(&|| train_xgb(&d, &params)).map_err(|e| e.to_string())?;
    let gbm = time(&|| train_gbm(&d, &params)).map_err(|e| e.to_string())?;
    let detail = format!("100k×9, 100 trees: lgbm {lgbm:.2}s, xgb {xgb:.2}s, gbm {gbm:.2}s");
    ensure!(
        gbm >= 5.0 * lgbm,
        "lgbm less than 5× faster than gbm; {detail}"
    );
    ensure!(xgb < gbm, "xgb not faster than gbm; {detail}");
    Ok(format!("{detail} ({:.1}× / {:.1}×)", gbm / lgbm, gbm / xgb))
}

/// Every stochastic artifact for one seed, as bytes.
fn artifacts() -> Result<Vec<(&'static str, Vec<u8>)>, String> {
    let e = |e: pnd_core::Error| e.to_string();
    let mut out = Vec::new();
    let d = random_dataset(9, 400, 4, false);
    let (tr, te) = stratified_split(&d, 0.7, 9).map_err(e)?;
    out.push(("split", [dataset_bytes(&tr), dataset_bytes(&te)].concat()));

    let skewed = imbalanced(9, 40, 4000);
    let cfg = SmoteConfig {
        seed: 9,
        ..SmoteConfig::default()
    };
    out.push(("smote", dataset_bytes(&smote(&skewed, &cfg).map_err(e)?)));

    for kind in ModelKind::ALL {
        let mut p = TrainParams::for_kind(kind);
        p.n_trees = 20;
        p.seed = 9;
        let m = train(kind, &tr, &p).map_err(e)?;
        out.push((kind.short_name(), m.to_bytes().map_err(e)?));
    }

    let bc = BenchmarkConfig {
        n_streams: 3,
        days_per_stream: 1.0,
        events_per_stream: 2,
        seed: 9,
        ..BenchmarkConfig::default()
    };
    let bench = build_benchmark(&bc).map_err(e)?;
    let mut synth = Vec::new();
    for s in &bench.streams {
        write_trades(&s.trades, &mut synth).map_err(e)?;
    }
    write_feature_csv(&bench.feature_rows(), &mut synth).map_err(e)?;
    out.push(("synth", synth));
    Ok(out)
}

fn c9_determinism() -> Outcome {
    let first = pool(1, artifacts)?;
    let runs = [
        pool(1, artifacts)?,
        pool(4, artifacts)?,
        pool(4, artifacts)?,
    ];
    for (r, run) in runs.iter().enumerate() {
        for ((name, a), (_, b)) in first.iter().zip(run) {
            ensure!(
                a == b,
                "{name}: run {} differs from the 1-thread baseline",
                r + 1
            );
        }
    }
    let names: Vec<&str> = first.iter().map(|a| a.0).collect();
    let bytes: usize = first.iter().map(|a| a.1.len()).sum();
    Ok(format!(
        "{} identical over 1/1/4/4 threads ({bytes} bytes)",
        names.join(", ")
    ))
}

fn c10_conservation() -> Outcome {
    let e = |e: pnd_core::Error| e.to_string();
    let bench = build_benchmark(&reduced_benchmark(0)).map_err(e)?;
    let mut n_events = 0;
    let mut n_pos_rows = 0;
    let mut drops: Vec<String> = Vec::new();
    for s in &bench.streams {
        let (ev, pos, d) = conserve(&s.config.symbol, &s.trades, &s.events, &bench.config.window)?;
        n_events += ev;
        n_pos_rows += pos;
        drops.extend(d);
    }
    ensure!(
        n_pos_rows == bench.n_pos,
        "benchmark reports {} positives",
        bench.n_pos
    );

    // one extra stream with a pump in its very first chunk, which warm-up drops
    let cfg = SynthConfig {
        symbol: "EDGE".into(),
        duration_days: 0.5,
        events: vec![
            EventSpec {
                start_offset_s: 0.0,
                ..EventSpec::default()
            },
            EventSpec {
                start_offset_s: 20_000.0,
                ..EventSpec::default()
            },
        ],
        seed: 10,
        ..SynthConfig::default()
    };
    let (trades, events) = generate(&cfg).map_err(e)?;
    let (ev, pos, d) = conserve("EDGE", &trades, &events, &WindowConfig::default())?;
    ensure!(d.len() == 1, "expected exactly one EDGE drop, got {d:?}");
    n_events += ev;
    n_pos_rows += pos;
    drops.extend(d);
    Ok(format!(
        "{} streams conserve volume; {n_pos_rows} positive rows = {n_events} events − {} dropped [{}]",
        bench.streams.len() + 1,
        drops.len(),
        drops.join(", ")
    ))
}

/// Re-chunks one stream and checks conservation; returns (events, positive
/// rows, itemized warm-up drops).
fn conserve(
    name: &str,
    trades: &[TradeRecord],
    events: &[PumpEvent],
    window: &WindowConfig,
) -> Result<(usize, usize, Vec<String>), String> {
    let e = |e: pnd_core::Error| e.to_string();
    let chunks = chunkize(trades, window.chunk_len_s).map_err(e)?;
    let qty: f64 = trades.iter().map(|t| t.quantity).sum();
    let vol: f64 = chunks.iter().map(|c| c.volume).sum();
    ensure!(
        (qty - vol).abs() <= 1e-9 * qty.abs(),
        "{name}: chunk volume {vol} vs trade quantity {qty}"
    );
    let n_trades: u64 = chunks.iter().map(|c| c.n_trades).sum();
    ensure!(
        n_trades as usize == trades.len(),
        "{name}: trade count drifted"
    );
    let labeled = label_chunks(&chunks, events).map_err(e)?;
    let out = compute_features(&labeled, window).map_err(e)?;
    let pos = out.rows.iter().filter(|r| r.label == 1).count();
    ensure!(
        pos + out.dropped_positive_starts.len() == events.len(),
        "{name}: {pos} positive rows + {} drops != {} events",
        out.dropped_positive_starts.len(),
        events.len()
    );
    let drops = out
        .dropped_positive_starts
        .iter()
        .map(|t| format!("{name}@{t}"))
        .collect();
    Ok((events.len(), pos, drops))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 F1 arithmetic", c1_f1_arithmetic),
        ("2 SMOTE count contract", c2_smote_counts),
        ("3 split contract", c3_split_counts),
        ("4 SMOTE improves recall", c4_smote_improves_recall),
        ("5 CART oracle", c5_cart_oracle),
        ("6 gradient check", c6_gradient_check),
        ("7 histogram = exact root", c7_histogram_matches_exact),
        ("8 training speed", c8_training_speed),
        ("9 determinism", c9_determinism),
        ("10 pipeline conservation", c10_conservation),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS criterion {name} ({secs:.1}s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {msg}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
