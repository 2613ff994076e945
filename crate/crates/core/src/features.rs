//! Trailing-window market statistics over the chunk grid.
//!
//! Every emitted row summarises the `W` chunks ending at (and including) the
//! current chunk, where `W = round(window_hours * 3600 / chunk_len_s)`. Near
//! the start of a stream the window is shorter; chunks with fewer than
//! `min_window_chunks` of history emit no row and are counted as warm-up drops.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{config, contract, Error, Result};
use crate::ingest::Chunk;

pub const N_FEATURES: usize = 9;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "StdRushOrders",
    "AvgRushOrders",
    "StdTrades",
    "StdVolumes",
    "AvgVolumes",
    "StdPrice",
    "AvgPrice",
    "AvgPriceMax",
    "AvgPriceMin",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub window_hours: f64,
    pub chunk_len_s: u32,
    pub min_window_chunks: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_hours: 7.0,
            chunk_len_s: 25,
            min_window_chunks: 2,
        }
    }
}

impl WindowConfig {
    /// Window length in chunks.
    pub fn window_chunks(&self) -> usize {
        (self.window_hours * 3600.0 / f64::from(self.chunk_len_s)).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_hours.is_finite() && self.window_hours > 0.0) {
            return Err(config("window_hours must be positive"));
        }
        if self.chunk_len_s == 0 {
            return Err(config("chunk_len_s must be at least 1"));
        }
        if self.min_window_chunks == 0 {
            return Err(config("min_window_chunks must be at least 1"));
        }
        if self.window_chunks() < self.min_window_chunks {
            return Err(config(format!(
                "window of {} chunks is shorter than min_window_chunks = {}",
                self.window_chunks(),
                self.min_window_chunks
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct FeatureRow {
    pub start_ms: i64,
    pub StdRushOrders: f64,
    pub AvgRushOrders: f64,
    pub StdTrades: f64,
    pub StdVolumes: f64,
    pub AvgVolumes: f64,
    pub StdPrice: f64,
    pub AvgPrice: f64,
    pub AvgPriceMax: f64,
    pub AvgPriceMin: f64,
    pub label: u8,
}

impl FeatureRow {
    /// Feature values in `FEATURE_NAMES` order.
    pub fn values(&self) -> [f64; N_FEATURES] {
        [
            self.StdRushOrders,
            self.AvgRushOrders,
            self.StdTrades,
            self.StdVolumes,
            self.AvgVolumes,
            self.StdPrice,
            self.AvgPrice,
            self.AvgPriceMax,
            self.AvgPriceMin,
        ]
    }

    fn from_values(start_ms: i64, v: [f64; N_FEATURES], label: u8) -> Self {
        Self {
            start_ms,
            StdRushOrders: v[0],
            AvgRushOrders: v[1],
            StdTrades: v[2],
            StdVolumes: v[3],
            AvgVolumes: v[4],
            StdPrice: v[5],
            AvgPrice: v[6],
            AvgPriceMax: v[7],
            AvgPriceMin: v[8],
            label,
        }
    }
}

/// Feature rows plus the warm-up bookkeeping for one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureOutput {
    pub rows: Vec<FeatureRow>,
    /// Chunks that produced no row because their history was too short.
    pub warmup_dropped: usize,
    /// `start_ms` of every positive chunk lost to warm-up.
    pub dropped_positive_starts: Vec<i64>,
}

/// Trailing mean and population standard deviation for every index `i` with
/// at least `min_len` values of history, using sliding Welford updates.
///
/// Returns `(mean, std)` for indices `min_len - 1 ..`.
pub fn rolling_mean_std(series: &[f64], window: usize, min_len: usize) -> Vec<(f64, f64)> {
    assert!(window >= 1 && min_len >= 1 && min_len <= window);
    let mut out = Vec::with_capacity(series.len().saturating_sub(min_len - 1));
    let mut n = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut replaced = 0usize;
    for (i, &x) in series.iter().enumerate() {
        if n < window {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        } else {
            let old = series[i - window];
            let d = x - old;
            let new_mean = mean + d / n as f64;
            m2 += d * (x - new_mean + old - mean);
            mean = new_mean;
            replaced += 1;
            // bound drift from repeated add/remove: exact refresh once per window
            if replaced == window {
                replaced = 0;
                let w = &series[i + 1 - window..=i];
                mean = w.iter().sum::<f64>() / n as f64;
                m2 = w.iter().map(|v| (v - mean) * (v - mean)).sum();
            }
        }
        if n >= min_len {
            out.push((mean, (m2.max(0.0) / n as f64).sqrt()));
        }
    }
    out
}

/// Computes one feature row per chunk with enough trailing history.
pub fn compute_features(chunks: &[Chunk], cfg: &WindowConfig) -> Result<FeatureOutput> {
    cfg.validate()?;
    for (i, c) in chunks.iter().enumerate() {
        if c.chunk_len_s != cfg.chunk_len_s {
            return Err(contract(format!(
                "chunk {i} has length {}s but the window expects {}s",
                c.chunk_len_s, cfg.chunk_len_s
            )));
        }
    }
    let len_ms = i64::from(cfg.chunk_len_s) * 1000;
    if let Some(i) = chunks
        .windows(2)
        .position(|w| w[1].start_ms - w[0].start_ms != len_ms)
    {
        return Err(contract(format!("irregular chunk grid at index {}", i + 1)));
    }

    let w = cfg.window_chunks();
    let min = cfg.min_window_chunks;
    let series = |f: fn(&Chunk) -> f64| -> Vec<(f64, f64)> {
        let s: Vec<f64> = chunks.iter().map(f).collect();
        rolling_mean_std(&s, w, min)
    };
    let rush = series(|c| c.rush_volume);
    let trades = series(|c| c.n_trades as f64);
    let volume = series(|c| c.volume);
    let close = series(|c| c.close_price);
    let high = series(|c| c.high_price);
    let low = series(|c| c.low_price);

    let warmup = chunks.len().min(min - 1);
    let rows = chunks[warmup..]
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let avg_price = close[k].0;
            // the per-chunk ordering low <= close <= high survives averaging
            // mathematically; rolling round-off can break it by an ulp
            let avg_max = high[k].0.max(avg_price);
            let avg_min = low[k].0.min(avg_price);
            FeatureRow::from_values(
                c.start_ms,
                [
                    rush[k].1,
                    rush[k].0,
                    trades[k].1,
                    volume[k].1,
                    volume[k].0,
                    close[k].1,
                    avg_price,
                    avg_max,
                    avg_min,
                ],
                c.label,
            )
        })
        .collect();
    let dropped_positive_starts = chunks[..warmup]
        .iter()
        .filter(|c| c.label == 1)
        .map(|c| c.start_ms)
        .collect();
    Ok(FeatureOutput {
        rows,
        warmup_dropped: warmup,
        dropped_positive_starts,
    })
}

fn feature_header() -> Vec<&'static str> {
    let mut h = vec!["start_ms"];
    h.extend(FEATURE_NAMES);
    h.push("label");
    h
}

/// 17 significant digits, lossless for every finite `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_feature_csv<W: Write>(rows: &[FeatureRow], sink: W) -> Result<usize> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(feature_header())?;
    let mut record = Vec::with_capacity(N_FEATURES + 2);
    for r in rows {
        record.clear();
        record.push(r.start_ms.to_string());
        record.extend(r.values().iter().map(|&v| format_f64(v)));
        record.push(r.label.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(rows.len())
}

pub fn read_feature_csv<R: Read>(source: R) -> Result<Vec<FeatureRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let expected = feature_header();
    let header = rdr.headers()?;
    if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != *b) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected feature header `{}`", expected.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != expected.len() {
            return Err(Error::Parse {
                line,
                message: format!(
                    "expected {} columns, found {}",
                    expected.len(),
                    record.len()
                ),
            });
        }
        let bad = |col: usize| Error::Parse {
            line,
            message: format!(
                "column `{}` value `{}` is not valid",
                expected[col], &record[col]
            ),
        };
        let start_ms: i64 = record[0].parse().map_err(|_| bad(0))?;
        let mut v = [0.0f64; N_FEATURES];
        for (j, slot) in v.iter_mut().enumerate() {
            *slot = record[j + 1].parse().map_err(|_| bad(j + 1))?;
            if !slot.is_finite() {
                return Err(Error::Validation {
                    line,
                    message: format!("non-finite value in `{}`", expected[j + 1]),
                });
            }
        }
        let label: u8 = match &record[N_FEATURES + 1] {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad(N_FEATURES + 1)),
        };
        rows.push(FeatureRow::from_values(start_ms, v, label));
    }
    Ok(rows)
}

/// Packs feature rows into a 9-column dataset.
pub fn rows_to_dataset(rows: &[FeatureRow]) -> Result<Dataset> {
    let mut data = Vec::with_capacity(rows.len() * N_FEATURES);
    for r in rows {
        data.extend_from_slice(&r.values());
    }
    let labels = rows.iter().map(|r| r.label).collect();
    Dataset::new(Matrix::new(data, N_FEATURES)?, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(i: i64, n: u64, vol: f64, rush: f64, close: f64, hi: f64, lo: f64) -> Chunk {
        Chunk {
            start_ms: i * 25_000,
            chunk_len_s: 25,
            n_trades: n,
            volume: vol,
            rush_volume: rush,
            close_price: close,
            high_price: hi,
            low_price: lo,
            label: 0,
        }
    }

    #[test]
    fn window_length_defaults() {
        let cfg = WindowConfig::default();
        assert_eq!(cfg.window_chunks(), 1008);
        assert!(cfg.validate().is_ok());
        let bad = WindowConfig {
            window_hours: 25.0 / 3600.0,
            ..cfg
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_series_has_zero_std() {
        let chunks: Vec<Chunk> = (0..50)
            .map(|i| chunk(i, 4, 3.5, 1.25, 10.1, 10.3, 9.9))
            .collect();
        let out = compute_features(&chunks, &WindowConfig::default()).unwrap();
        assert_eq!(out.rows.len(), 49);
        for r in &out.rows {
            assert_eq!(r.StdRushOrders, 0.0);
            assert_eq!(r.StdTrades, 0.0);
            assert_eq!(r.StdVolumes, 0.0);
            assert_eq!(r.StdPrice, 0.0);
            assert_eq!(r.AvgRushOrders, 1.25);
            assert_eq!(r.AvgVolumes, 3.5);
            assert_eq!(r.AvgPrice, 10.1);
            assert_eq!(r.AvgPriceMax, 10.3);
            assert_eq!(r.AvgPriceMin, 9.9);
        }
    }

    #[test]
    fn two_chunk_window_uses_population_std() {
        let chunks = vec![
            chunk(0, 1, 2.0, 0.0, 1.0, 1.0, 1.0),
            chunk(1, 1, 4.0, 0.0, 1.0, 1.0, 1.0),
        ];
        let cfg = WindowConfig {
            window_hours: 50.0 / 3600.0,
            ..Default::default()
        };
        assert_eq!(cfg.window_chunks(), 2);
        let out = compute_features(&chunks, &cfg).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].AvgVolumes, 3.0);
        assert_eq!(out.rows[0].StdVolumes, 1.0);
        assert_eq!(out.warmup_dropped, 1);
    }

    #[test]
    fn warmup_drops_are_itemized() {
        let mut chunks: Vec<Chunk> = (0..10)
            .map(|i| chunk(i, 1, 1.0, 1.0, 1.0, 1.0, 1.0))
            .collect();
        chunks[0].label = 1;
        chunks[5].label = 1;
        let cfg = WindowConfig {
            min_window_chunks: 3,
            ..Default::default()
        };
        let out = compute_features(&chunks, &cfg).unwrap();
        assert_eq!(out.warmup_dropped, 2);
        assert_eq!(out.dropped_positive_starts, vec![0]);
        assert_eq!(out.rows.iter().filter(|r| r.label == 1).count(), 1);
        assert_eq!(out.rows[0].start_ms, 50_000);
    }

    #[test]
    fn irregular_grid_is_rejected() {
        let chunks = vec![
            chunk(0, 1, 1.0, 1.0, 1.0, 1.0, 1.0),
            chunk(2, 1, 1.0, 1.0, 1.0, 1.0, 1.0),
        ];
        assert!(matches!(
            compute_features(&chunks, &WindowConfig::default()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn csv_shapes() {
        let mut buf = Vec::new();
        assert_eq!(write_feature_csv(&[], &mut buf).unwrap(), 0);
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "start_ms,StdRushOrders,AvgRushOrders,StdTrades,StdVolumes,AvgVolumes,StdPrice,AvgPrice,AvgPriceMax,AvgPriceMin,label\n"
        );
        let row = FeatureRow::from_values(25_000, [0.1; N_FEATURES], 1);
        let mut buf = Vec::new();
        assert_eq!(write_feature_csv(&[row], &mut buf).unwrap(), 1);
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 2);
        assert_eq!(read_feature_csv(buf.as_slice()).unwrap(), vec![row]);
    }

    #[test]
    fn bad_feature_csv_is_rejected() {
        let header = feature_header().join(",");
        let short = format!("{header}\n0,1,2\n");
        assert!(matches!(
            read_feature_csv(short.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let label = format!("{header}\n0,1,1,1,1,1,1,1,1,1,2\n");
        assert!(read_feature_csv(label.as_bytes()).is_err());
        assert!(read_feature_csv("a,b\n".as_bytes()).is_err());
    }
}
