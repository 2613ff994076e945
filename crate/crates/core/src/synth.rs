//! Seeded synthetic trade streams with injected pump-and-dump events.
//!
//! Baseline flow is a Poisson process with log-normal quantities, a
//! per-chunk log-price random walk and fair-coin taker sides. Inside a pump
//! window the arrival rate is multiplied, takers lean to the buy side, the
//! price ramps up linearly per chunk and then drops in one step when the
//! window closes. All numeric parameters are synthetic.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{config, Error, Result};
use crate::features::{
    compute_features, rows_to_dataset, write_feature_csv, FeatureRow, WindowConfig,
};
use crate::ingest::{chunkize, label_chunks, write_events, write_trades, PumpEvent, TradeRecord};
use crate::rng::{derive_seed, rng_for};

const DAY_S: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventSpec {
    pub start_offset_s: f64,
    pub pump_duration_s: f64,
    pub rate_multiplier: f64,
    /// Taker-buy probability inside the window.
    pub buy_bias: f64,
    /// Total price rise over the window, in percent.
    pub price_ramp_pct: f64,
    /// Single-step drop at the window end, in percent of the peak.
    pub crash_pct: f64,
}

impl Default for EventSpec {
    fn default() -> Self {
        Self {
            start_offset_s: 0.0,
            pump_duration_s: 600.0,
            rate_multiplier: 100.0,
            buy_bias: 0.9,
            price_ramp_pct: 30.0,
            crash_pct: 35.0,
        }
    }
}

impl EventSpec {
    fn end_s(&self) -> f64 {
        self.start_offset_s + self.pump_duration_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub symbol: String,
    pub duration_days: f64,
    /// Baseline trades per second.
    pub base_trade_rate: f64,
    pub volume_lognorm_mu: f64,
    pub volume_lognorm_sigma: f64,
    pub price_start: f64,
    /// Standard deviation of the log-price step per chunk.
    pub price_walk_sigma: f64,
    pub taker_buy_prob: f64,
    pub chunk_len_s: u32,
    /// Stream origin; must sit on the chunk grid.
    pub start_ms: i64,
    pub events: Vec<EventSpec>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            symbol: "SYN".into(),
            duration_days: 14.0,
            base_trade_rate: 0.2,
            volume_lognorm_mu: 0.0,
            volume_lognorm_sigma: 1.0,
            price_start: 1.0,
            price_walk_sigma: 0.001,
            taker_buy_prob: 0.5,
            chunk_len_s: 25,
            start_ms: 1_600_000_000_000,
            events: Vec::new(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn duration_s(&self) -> f64 {
        self.duration_days * DAY_S
    }

    pub fn n_chunks(&self) -> usize {
        (self.duration_s() / f64::from(self.chunk_len_s)).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config(format!("{name} must be positive, got {v}")))
            }
        };
        pos(self.duration_days, "duration_days")?;
        pos(self.base_trade_rate, "base_trade_rate")?;
        pos(self.volume_lognorm_sigma, "volume_lognorm_sigma")?;
        pos(self.price_start, "price_start")?;
        if !(self.price_walk_sigma >= 0.0 && self.price_walk_sigma.is_finite()) {
            return Err(config("price_walk_sigma must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.taker_buy_prob) {
            return Err(config("taker_buy_prob must lie in [0, 1]"));
        }
        if self.chunk_len_s == 0 {
            return Err(config("chunk_len_s must be positive"));
        }
        if self.start_ms.rem_euclid(i64::from(self.chunk_len_s) * 1000) != 0 {
            return Err(config("start_ms must be a multiple of the chunk length"));
        }
        let duration = self.duration_s();
        for (i, e) in self.events.iter().enumerate() {
            pos(e.pump_duration_s, "pump_duration_s")?;
            pos(e.rate_multiplier, "rate_multiplier")?;
            if !(e.buy_bias > 0.5 && e.buy_bias <= 1.0) {
                return Err(config(format!("event {i}: buy_bias must lie in (0.5, 1]")));
            }
            if !(e.price_ramp_pct >= 0.0) || !(0.0..100.0).contains(&e.crash_pct) {
                return Err(config(format!(
                    "event {i}: price_ramp_pct must be >= 0 and crash_pct in [0, 100)"
                )));
            }
            if !(e.start_offset_s >= 0.0) || e.end_s() > duration {
                return Err(config(format!(
                    "event {i}: pump window falls outside the stream"
                )));
            }
        }
        let mut order: Vec<&EventSpec> = self.events.iter().collect();
        order.sort_by(|a, b| a.start_offset_s.total_cmp(&b.start_offset_s));
        if let Some(w) = order
            .windows(2)
            .find(|w| w[1].start_offset_s < w[0].end_s())
        {
            return Err(config(format!(
                "pump windows overlap: [{}, {}) and [{}, {})",
                w[0].start_offset_s,
                w[0].end_s(),
                w[1].start_offset_s,
                w[1].end_s()
            )));
        }
        Ok(())
    }
}

/// Per-chunk price path: random walk times the pump shape.
fn price_path(cfg: &SynthConfig, events: &[EventSpec], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = cfg.n_chunks();
    let len = f64::from(cfg.chunk_len_s);
    let step = Normal::new(0.0, cfg.price_walk_sigma).expect("sigma validated");
    let mut log_p = cfg.price_start.ln();
    let mut out = Vec::with_capacity(n);
    // persistent level change left behind by finished pumps
    let mut level = 1.0;
    let mut next = 0;
    for c in 0..n {
        log_p += step.sample(rng);
        let t = c as f64 * len;
        while next < events.len() && t >= events[next].end_s() {
            let e = &events[next];
            level *= (1.0 + e.price_ramp_pct / 100.0) * (1.0 - e.crash_pct / 100.0);
            next += 1;
        }
        let mut factor = level;
        if let Some(e) = events.get(next) {
            if t + len > e.start_offset_s {
                let first = (e.start_offset_s / len).floor();
                let last = (e.end_s() / len).ceil();
                let k = c as f64 - first + 1.0;
                factor *= 1.0 + e.price_ramp_pct / 100.0 * (k / (last - first)).min(1.0);
            }
        }
        out.push(log_p.exp() * factor);
    }
    out
}

/// Generates one trade stream and its pump events. Fully determined by the
/// config, including its seed.
pub fn generate(cfg: &SynthConfig) -> Result<(Vec<TradeRecord>, Vec<PumpEvent>)> {
    cfg.validate()?;
    let mut events = cfg.events.clone();
    events.sort_by(|a, b| a.start_offset_s.total_cmp(&b.start_offset_s));
    let mut rng = rng_for(cfg.seed, 0);
    let prices = price_path(cfg, &events, &mut rng);
    let qty = LogNormal::new(cfg.volume_lognorm_mu, cfg.volume_lognorm_sigma)
        .map_err(|e| config(format!("volume distribution: {e}")))?;
    let jitter = Normal::new(0.0, cfg.price_walk_sigma * 0.25).expect("sigma validated");
    let len = f64::from(cfg.chunk_len_s);
    let duration = cfg.duration_s();
    let last_chunk_start = (cfg.n_chunks() - 1) as f64 * len;

    // rate segments: (start, end, rate multiplier, taker-buy probability)
    let mut segments = Vec::new();
    let mut t0 = 0.0;
    for e in &events {
        if e.start_offset_s > t0 {
            segments.push((t0, e.start_offset_s, 1.0, cfg.taker_buy_prob));
        }
        segments.push((e.start_offset_s, e.end_s(), e.rate_multiplier, e.buy_bias));
        t0 = e.end_s();
    }
    if t0 < duration {
        segments.push((t0, duration, 1.0, cfg.taker_buy_prob));
    }

    let mut trades = Vec::new();
    let mut emit = |t: f64, buy_p: f64, rng: &mut ChaCha8Rng| {
        let chunk = ((t / len) as usize).min(prices.len() - 1);
        let ms = cfg.start_ms + (t * 1000.0).floor() as i64;
        trades.push(TradeRecord {
            timestamp_ms: ms,
            price: prices[chunk] * jitter.sample(rng).exp(),
            quantity: qty.sample(rng),
            taker_is_buyer: rng.random::<f64>() < buy_p,
        });
    };
    // anchors pin the grid to the full stream span
    emit(0.0, cfg.taker_buy_prob, &mut rng);
    for &(start, end, mult, buy_p) in &segments {
        let arrivals = Exp::new(cfg.base_trade_rate * mult)
            .map_err(|e| config(format!("arrival rate: {e}")))?;
        let mut t = start;
        loop {
            t += arrivals.sample(&mut rng);
            if t >= end {
                break;
            }
            emit(t, buy_p, &mut rng);
        }
    }
    emit(last_chunk_start, cfg.taker_buy_prob, &mut rng);
    trades.sort_by_key(|t| t.timestamp_ms);

    let pumps = events
        .iter()
        .map(|e| PumpEvent {
            symbol: cfg.symbol.clone(),
            pump_start_ms: cfg.start_ms + (e.start_offset_s * 1000.0).floor() as i64,
        })
        .collect();
    Ok((trades, pumps))
}

/// Layout of a multi-stream benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub n_streams: usize,
    pub days_per_stream: f64,
    pub events_per_stream: usize,
    /// Required negative:positive ratio (±10%); `None` accepts any ratio.
    pub imbalance_target: Option<f64>,
    /// Baseline parameters shared by every stream.
    pub template: SynthConfig,
    /// Pump shape; multiplier and duration are redrawn per event.
    pub event_template: EventSpec,
    /// Per-stream base rate is scaled by `exp(u)`, `u ~ U(-spread, spread)`.
    pub rate_spread: f64,
    /// Per-event rate multiplier is drawn log-uniformly from this range.
    pub multiplier_range: (f64, f64),
    /// Per-event pump duration in seconds, drawn uniformly.
    pub duration_range_s: (f64, f64),
    pub window: WindowConfig,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n_streams: 10,
            days_per_stream: 14.0,
            events_per_stream: 3,
            imbalance_target: None,
            template: SynthConfig::default(),
            event_template: EventSpec::default(),
            rate_spread: 0.5,
            multiplier_range: (20.0, 200.0),
            duration_range_s: (300.0, 900.0),
            window: WindowConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub symbol: String,
    pub seed: u64,
    pub base_trade_rate: f64,
    pub events: Vec<EventSpec>,
    pub n_trades: usize,
    pub n_chunks: usize,
    pub n_events: usize,
    pub positive_rows: usize,
    pub negative_rows: usize,
    pub warmup_dropped: usize,
    pub dropped_positive_starts: Vec<i64>,
    pub trade_quantity_sum: f64,
    pub chunk_volume_sum: f64,
}

/// One generated stream with every intermediate artifact.
#[derive(Debug, Clone)]
pub struct StreamData {
    pub config: SynthConfig,
    pub trades: Vec<TradeRecord>,
    pub events: Vec<PumpEvent>,
    pub features: Vec<FeatureRow>,
    pub summary: StreamSummary,
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub config: BenchmarkConfig,
    pub streams: Vec<StreamData>,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl Benchmark {
    pub fn achieved_imbalance(&self) -> f64 {
        self.n_neg as f64 / self.n_pos.max(1) as f64
    }

    /// All streams' feature rows, stream by stream.
    pub fn feature_rows(&self) -> Vec<FeatureRow> {
        self.streams
            .iter()
            .flat_map(|s| s.features.iter().cloned())
            .collect()
    }

    pub fn dataset(&self) -> Result<Dataset> {
        rows_to_dataset(&self.feature_rows())
    }
}

/// Stream config for stream `i`: derived seed, jittered base rate and evenly
/// spread, chunk-aligned, non-overlapping pump windows after a warm-up lead.
fn stream_config(bc: &BenchmarkConfig, i: usize) -> SynthConfig {
    let seed = derive_seed(bc.seed, i as u64);
    let mut rng = rng_for(seed, 1);
    let mut cfg = bc.template.clone();
    cfg.symbol = format!("SYN{i:03}");
    cfg.seed = seed;
    cfg.duration_days = bc.days_per_stream;
    cfg.chunk_len_s = bc.window.chunk_len_s;
    let spread = bc.rate_spread;
    if spread > 0.0 {
        cfg.base_trade_rate *= rng.random_range(-spread..=spread).exp();
    }
    let len = f64::from(cfg.chunk_len_s);
    let n_chunks = cfg.n_chunks();
    let lead = bc
        .window
        .window_chunks()
        .min(n_chunks / 4)
        .max(bc.window.min_window_chunks);
    let slot = (n_chunks - lead) / bc.events_per_stream;
    let (mlo, mhi) = bc.multiplier_range;
    let (dlo, dhi) = bc.duration_range_s;
    cfg.events = (0..bc.events_per_stream)
        .map(|k| {
            let duration = if dhi > dlo {
                rng.random_range(dlo..=dhi)
            } else {
                dlo
            };
            let dur_chunks = (duration / len).ceil() as usize;
            let free = slot.saturating_sub(dur_chunks + 1).max(1);
            let start_chunk = lead + k * slot + rng.random_range(0..free);
            let mult = if mhi > mlo {
                (rng.random_range(mlo.ln()..=mhi.ln())).exp()
            } else {
                mlo
            };
            EventSpec {
                start_offset_s: start_chunk as f64 * len,
                pump_duration_s: duration,
                rate_multiplier: mult,
                ..bc.event_template
            }
        })
        .collect();
    cfg
}

fn run_stream(bc: &BenchmarkConfig, i: usize) -> Result<StreamData> {
    let cfg = stream_config(bc, i);
    let (trades, events) = generate(&cfg)?;
    let chunks = label_chunks(&chunkize(&trades, cfg.chunk_len_s)?, &events)?;
    let out = compute_features(&chunks, &bc.window)?;
    let positive_rows = out.rows.iter().filter(|r| r.label == 1).count();
    let summary = StreamSummary {
        symbol: cfg.symbol.clone(),
        seed: cfg.seed,
        base_trade_rate: cfg.base_trade_rate,
        events: cfg.events.clone(),
        n_trades: trades.len(),
        n_chunks: chunks.len(),
        n_events: events.len(),
        positive_rows,
        negative_rows: out.rows.len() - positive_rows,
        warmup_dropped: out.warmup_dropped,
        dropped_positive_starts: out.dropped_positive_starts.clone(),
        trade_quantity_sum: trades.iter().map(|t| t.quantity).sum(),
        chunk_volume_sum: chunks.iter().map(|c| c.volume).sum(),
    };
    Ok(StreamData {
        config: cfg,
        trades,
        events,
        features: out.rows,
        summary,
    })
}

/// Generates, chunks, labels and featurizes every stream in memory.
pub fn build_benchmark(bc: &BenchmarkConfig) -> Result<Benchmark> {
    if bc.n_streams == 0 {
        return Err(config("n_streams must be at least 1"));
    }
    if bc.events_per_stream == 0 {
        return Err(Error::Unsatisfiable(
            "events_per_stream = 0 leaves the benchmark without a positive class".into(),
        ));
    }
    bc.window.validate()?;
    if let Some(t) = bc.imbalance_target {
        if !(t >= 100.0) {
            return Err(config(format!(
                "imbalance_target must be at least 100, got {t}"
            )));
        }
    }
    let (mlo, mhi) = bc.multiplier_range;
    let (dlo, dhi) = bc.duration_range_s;
    if !(mlo > 0.0 && mhi >= mlo) || !(dlo > 0.0 && dhi >= dlo) {
        return Err(config(
            "multiplier_range and duration_range_s need 0 < lo <= hi",
        ));
    }
    let n_chunks = (bc.days_per_stream * DAY_S / f64::from(bc.window.chunk_len_s)).ceil() as usize;
    let longest = (dhi / f64::from(bc.window.chunk_len_s)).ceil() as usize + 2;
    if n_chunks < 4 * bc.events_per_stream * longest {
        return Err(Error::Unsatisfiable(format!(
            "{} events do not fit in {n_chunks} chunks per stream",
            bc.events_per_stream
        )));
    }

    let streams: Vec<StreamData> = (0..bc.n_streams)
        .into_par_iter()
        .map(|i| run_stream(bc, i))
        .collect::<Result<_>>()?;
    let n_pos = streams.iter().map(|s| s.summary.positive_rows).sum();
    let n_neg = streams.iter().map(|s| s.summary.negative_rows).sum();
    let bench = Benchmark {
        config: bc.clone(),
        streams,
        n_pos,
        n_neg,
    };
    if let Some(t) = bc.imbalance_target {
        let got = bench.achieved_imbalance();
        if n_pos == 0 || (got - t).abs() > 0.1 * t {
            return Err(Error::Unsatisfiable(format!(
                "achieved imbalance {got:.1}:1 ({n_neg} negatives / {n_pos} positives) is more than 10% off the target {t}:1"
            )));
        }
    }
    Ok(bench)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamFiles {
    pub symbol: String,
    pub trades: PathBuf,
    pub events: PathBuf,
    pub features: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: BenchmarkConfig,
    /// Combined feature CSV over every stream.
    pub features: PathBuf,
    pub streams: Vec<StreamFiles>,
    pub summaries: Vec<StreamSummary>,
    pub n_pos: usize,
    pub n_neg: usize,
    pub achieved_imbalance: f64,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(
            File::open(path)?,
        ))?)
    }
}

/// Builds the benchmark and writes trade, event and feature CSVs per stream,
/// a combined feature CSV and `manifest.json` under `out_dir`. Paths in the
/// manifest are relative to `out_dir`.
pub fn make_benchmark(bc: &BenchmarkConfig, out_dir: &Path) -> Result<(Manifest, PathBuf)> {
    let bench = build_benchmark(bc)?;
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    for s in &bench.streams {
        let sym = &s.summary.symbol;
        let f = StreamFiles {
            symbol: sym.clone(),
            trades: PathBuf::from(format!("{sym}_trades.csv")),
            events: PathBuf::from(format!("{sym}_events.csv")),
            features: PathBuf::from(format!("{sym}_features.csv")),
        };
        write_trades(
            &s.trades,
            BufWriter::new(File::create(out_dir.join(&f.trades))?),
        )?;
        write_events(
            &s.events,
            BufWriter::new(File::create(out_dir.join(&f.events))?),
        )?;
        write_feature_csv(
            &s.features,
            BufWriter::new(File::create(out_dir.join(&f.features))?),
        )?;
        files.push(f);
    }
    let combined = PathBuf::from("features.csv");
    write_feature_csv(
        &bench.feature_rows(),
        BufWriter::new(File::create(out_dir.join(&combined))?),
    )?;
    let manifest = Manifest {
        config: bc.clone(),
        features: combined,
        streams: files,
        summaries: bench.streams.iter().map(|s| s.summary.clone()).collect(),
        n_pos: bench.n_pos,
        n_neg: bench.n_neg,
        achieved_imbalance: bench.achieved_imbalance(),
    };
    let path = out_dir.join("manifest.json");
    serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &manifest)?;
    Ok((manifest, path))
}
