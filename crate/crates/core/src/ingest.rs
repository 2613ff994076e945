//! Trade-log ingestion: CSV parsing, aggregation onto a regular chunk grid,
//! and ground-truth labeling from a pump event list.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

pub const TRADE_HEADER: [&str; 4] = ["timestamp_ms", "price", "quantity", "taker_is_buyer"];
pub const EVENT_HEADER: [&str; 2] = ["symbol", "pump_start_ms"];
pub const CHUNK_HEADER: [&str; 8] = [
    "start_ms",
    "n_trades",
    "volume",
    "rush_volume",
    "close",
    "high",
    "low",
    "label",
];

pub const DEFAULT_CHUNK_SECONDS: u32 = 25;

/// One executed trade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub timestamp_ms: i64,
    pub price: f64,
    pub quantity: f64,
    /// `true` when the aggressor was a buyer (market buy).
    pub taker_is_buyer: bool,
}

/// Aggregate of all trades falling in `[start_ms, start_ms + chunk_len)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chunk {
    pub start_ms: i64,
    pub chunk_len_s: u32,
    pub n_trades: u64,
    pub volume: f64,
    /// Quantity traded by aggressive buyers; the rush-order proxy.
    pub rush_volume: f64,
    pub close_price: f64,
    pub high_price: f64,
    pub low_price: f64,
    pub label: u8,
}

impl Chunk {
    pub fn end_ms(&self) -> i64 {
        self.start_ms + chunk_len_ms(self.chunk_len_s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PumpEvent {
    pub symbol: String,
    pub pump_start_ms: i64,
}

fn chunk_len_ms(chunk_len_s: u32) -> i64 {
    i64::from(chunk_len_s) * 1000
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let ok =
        found.len() == expected.len() && found.iter().zip(expected).all(|(a, b)| a.trim() == *b);
    if ok {
        Ok(())
    } else {
        Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        })
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

/// Parses a trade CSV and returns its rows sorted by timestamp (stable for ties).
pub fn parse_trades<R: Read>(source: R) -> Result<Vec<TradeRecord>> {
    let mut rdr = reader(source);
    check_header(rdr.headers()?, &TRADE_HEADER)?;
    let mut trades = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != TRADE_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 columns, found {}", record.len()),
            });
        }
        let bad = |what: &str, v: &str| Error::Parse {
            line,
            message: format!("{what} `{v}` is not valid"),
        };
        let timestamp_ms: i64 = record[0]
            .parse()
            .map_err(|_| bad("timestamp_ms", &record[0]))?;
        let price: f64 = record[1].parse().map_err(|_| bad("price", &record[1]))?;
        let quantity: f64 = record[2].parse().map_err(|_| bad("quantity", &record[2]))?;
        let taker_is_buyer =
            parse_bool(&record[3]).ok_or_else(|| bad("taker_is_buyer", &record[3]))?;
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::Validation {
                line,
                message: format!("price must be positive, got {price}"),
            });
        }
        if !(quantity.is_finite() && quantity > 0.0) {
            return Err(Error::Validation {
                line,
                message: format!("quantity must be positive, got {quantity}"),
            });
        }
        trades.push(TradeRecord {
            timestamp_ms,
            price,
            quantity,
            taker_is_buyer,
        });
    }
    trades.sort_by_key(|t| t.timestamp_ms);
    Ok(trades)
}

pub fn write_trades<W: Write>(trades: &[TradeRecord], sink: W) -> Result<usize> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(TRADE_HEADER)?;
    for t in trades {
        w.write_record([
            t.timestamp_ms.to_string(),
            t.price.to_string(),
            t.quantity.to_string(),
            t.taker_is_buyer.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(trades.len())
}

pub fn parse_events<R: Read>(source: R) -> Result<Vec<PumpEvent>> {
    let mut rdr = reader(source);
    check_header(rdr.headers()?, &EVENT_HEADER)?;
    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != EVENT_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let pump_start_ms = record[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("pump_start_ms `{}` is not an integer", &record[1]),
        })?;
        events.push(PumpEvent {
            symbol: record[0].to_string(),
            pump_start_ms,
        });
    }
    Ok(events)
}

pub fn write_events<W: Write>(events: &[PumpEvent], sink: W) -> Result<usize> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(EVENT_HEADER)?;
    for e in events {
        w.write_record([e.symbol.clone(), e.pump_start_ms.to_string()])?;
    }
    w.flush()?;
    Ok(events.len())
}

/// Aggregates a time-sorted trade stream onto a regular grid of
/// `chunk_len_s`-second chunks. Empty slots are emitted with the previous
/// close carried forward.
pub fn chunkize(trades: &[TradeRecord], chunk_len_s: u32) -> Result<Vec<Chunk>> {
    if chunk_len_s == 0 {
        return Err(contract("chunk length must be at least one second"));
    }
    if let Some(i) = trades
        .windows(2)
        .position(|w| w[1].timestamp_ms < w[0].timestamp_ms)
    {
        return Err(contract(format!(
            "trades not sorted by timestamp at index {}",
            i + 1
        )));
    }
    let (Some(first), Some(last)) = (trades.first(), trades.last()) else {
        return Ok(Vec::new());
    };
    let len = chunk_len_ms(chunk_len_s);
    let origin = first.timestamp_ms.div_euclid(len) * len;
    let n_chunks = ((last.timestamp_ms - origin) / len + 1) as usize;

    let mut chunks = Vec::with_capacity(n_chunks);
    let mut close = first.price;
    let mut cursor = 0usize;
    for slot in 0..n_chunks {
        let start_ms = origin + slot as i64 * len;
        let end_ms = start_ms + len;
        let mut chunk = Chunk {
            start_ms,
            chunk_len_s,
            n_trades: 0,
            volume: 0.0,
            rush_volume: 0.0,
            close_price: close,
            high_price: f64::NEG_INFINITY,
            low_price: f64::INFINITY,
            label: 0,
        };
        while cursor < trades.len() && trades[cursor].timestamp_ms < end_ms {
            let t = &trades[cursor];
            chunk.n_trades += 1;
            chunk.volume += t.quantity;
            if t.taker_is_buyer {
                chunk.rush_volume += t.quantity;
            }
            chunk.high_price = chunk.high_price.max(t.price);
            chunk.low_price = chunk.low_price.min(t.price);
            chunk.close_price = t.price;
            cursor += 1;
        }
        if chunk.n_trades == 0 {
            chunk.high_price = close;
            chunk.low_price = close;
        }
        close = chunk.close_price;
        chunks.push(chunk);
    }
    debug_assert_eq!(cursor, trades.len());
    Ok(chunks)
}

fn check_grid(chunks: &[Chunk]) -> Result<()> {
    for (i, w) in chunks.windows(2).enumerate() {
        if w[1].chunk_len_s != w[0].chunk_len_s
            || w[1].start_ms - w[0].start_ms != chunk_len_ms(w[0].chunk_len_s)
        {
            return Err(contract(format!("irregular chunk grid at index {}", i + 1)));
        }
    }
    Ok(())
}

/// Marks exactly one chunk per event (the one containing `pump_start_ms`) as
/// positive and every other chunk as negative.
pub fn label_chunks(chunks: &[Chunk], events: &[PumpEvent]) -> Result<Vec<Chunk>> {
    check_grid(chunks)?;
    let mut out: Vec<Chunk> = chunks.iter().map(|c| Chunk { label: 0, ..*c }).collect();
    if events.is_empty() {
        return Ok(out);
    }
    let (Some(first), Some(last)) = (chunks.first(), chunks.last()) else {
        return Err(Error::Labeling(format!(
            "event {} at {} falls outside an empty stream",
            events[0].symbol, events[0].pump_start_ms
        )));
    };
    let len = chunk_len_ms(first.chunk_len_s);
    let mut owner: Vec<Option<usize>> = vec![None; out.len()];
    for (e_idx, event) in events.iter().enumerate() {
        let t = event.pump_start_ms;
        if t < first.start_ms || t >= last.end_ms() {
            return Err(Error::Labeling(format!(
                "event #{e_idx} ({} at {t}) is outside the stream range [{}, {})",
                event.symbol,
                first.start_ms,
                last.end_ms()
            )));
        }
        let slot = ((t - first.start_ms) / len) as usize;
        if let Some(prev) = owner[slot] {
            return Err(Error::Labeling(format!(
                "events #{prev} and #{e_idx} both map to the chunk starting at {}",
                out[slot].start_ms
            )));
        }
        owner[slot] = Some(e_idx);
        out[slot].label = 1;
    }
    Ok(out)
}

pub fn write_chunks<W: Write>(chunks: &[Chunk], sink: W) -> Result<usize> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CHUNK_HEADER)?;
    for c in chunks {
        w.write_record([
            c.start_ms.to_string(),
            c.n_trades.to_string(),
            c.volume.to_string(),
            c.rush_volume.to_string(),
            c.close_price.to_string(),
            c.high_price.to_string(),
            c.low_price.to_string(),
            c.label.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(chunks.len())
}
