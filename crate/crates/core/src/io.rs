//! CSV and JSON artifact formats shared by the library and the CLI.
//!
//! Ingestion accepts `timestamp,close` rows with ISO-8601 or epoch-second
//! timestamps on an hourly grid; gaps either abort or forward-fill the
//! last close. All exported timestamps are ISO-8601 UTC.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{de::DeserializeOwned, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{LabelSeries, PriceSeries, ProbabilitySeries, TvarSeries};

/// What to do with holes in the hourly grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapPolicy {
    Error,
    ForwardFill,
}

fn parse_timestamp(raw: &str, line: usize) -> Result<i64> {
    let raw = raw.trim();
    if let Ok(secs) = raw.parse::<i64>() {
        if secs % 3600 != 0 {
            return Err(Error::Io(format!(
                "line {line}: epoch timestamp {secs} is not on an hourly boundary"
            )));
        }
        return Ok(secs / 3600);
    }
    let parsed = DateTime::parse_from_rfc3339(raw)
        .map(|dt| dt.with_timezone(&Utc))
        .or_else(|_| {
            NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S").map(|n| n.and_utc())
        })
        .or_else(|_| {
            NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S").map(|n| n.and_utc())
        })
        .map_err(|e| Error::Io(format!("line {line}: unparseable timestamp {raw:?}: {e}")))?;
    let secs = parsed.timestamp();
    if secs % 3600 != 0 {
        return Err(Error::Io(format!(
            "line {line}: timestamp {raw:?} is not on an hourly boundary"
        )));
    }
    Ok(secs / 3600)
}

/// Render an epoch-hour stamp as ISO-8601 UTC.
pub fn format_timestamp(hour: i64) -> String {
    let dt = DateTime::<Utc>::from_timestamp(hour * 3600, 0).expect("in-range timestamp");
    dt.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Read a `timestamp,close` file into a validated hourly price series.
pub fn read_price_csv(path: &Path, gaps: GapPolicy) -> Result<PriceSeries> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut timestamps = Vec::new();
    let mut closes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let ts_field = parts.next().unwrap_or("");
        let close_field = parts
            .next()
            .ok_or_else(|| Error::Io(format!("line {}: expected timestamp,close", i + 1)))?;
        if i == 0 && ts_field.eq_ignore_ascii_case("timestamp") {
            continue; // header row
        }
        let t = parse_timestamp(ts_field, i + 1)?;
        let close: f64 = close_field
            .trim()
            .parse()
            .map_err(|e| Error::Io(format!("line {}: bad close {close_field:?}: {e}", i + 1)))?;
        timestamps.push(t);
        closes.push(close);
    }

    // enforce the hourly grid
    let mut filled_ts = Vec::with_capacity(timestamps.len());
    let mut filled_close = Vec::with_capacity(closes.len());
    for i in 0..timestamps.len() {
        if i > 0 {
            let gap = timestamps[i] - timestamps[i - 1];
            if gap <= 0 {
                return Err(Error::InvalidSeries {
                    index: i,
                    reason: "timestamps not strictly increasing".into(),
                });
            }
            if gap > 1 {
                match gaps {
                    GapPolicy::Error => {
                        return Err(Error::Io(format!(
                            "gap of {gap} hours before {}",
                            format_timestamp(timestamps[i])
                        )))
                    }
                    GapPolicy::ForwardFill => {
                        for h in 1..gap {
                            filled_ts.push(timestamps[i - 1] + h);
                            filled_close.push(closes[i - 1]);
                        }
                    }
                }
            }
        }
        filled_ts.push(timestamps[i]);
        filled_close.push(closes[i]);
    }
    PriceSeries::new(filled_ts, filled_close)
}

pub fn write_price_csv(path: &Path, prices: &PriceSeries) -> Result<()> {
    let mut out = String::from("timestamp,close\n");
    for (t, c) in prices.timestamps().iter().zip(prices.closes()) {
        writeln!(out, "{},{}", format_timestamp(*t), fmt_float(*c)).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Shortest round-trippable decimal rendering.
fn fmt_float(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// `timestamp,tvar_upper,tvar_lower,label` rows on the labeled range.
pub fn write_tvar_label_csv(
    path: &Path,
    tvar: &TvarSeries,
    labels: &LabelSeries,
) -> Result<()> {
    // labels are stamped one step after the threshold they used; walk the
    // label stamps and pull the matching threshold entry
    let mut out = String::from("timestamp,tvar_upper,tvar_lower,label\n");
    let mut k = 0usize;
    for (i, &lt) in labels.timestamps.iter().enumerate() {
        while k < tvar.len() && tvar.timestamps()[k] < lt - 1 {
            k += 1;
        }
        if k == tvar.len() || tvar.timestamps()[k] != lt - 1 {
            return Err(Error::Misaligned(format!(
                "no threshold stamped {} for label at {}",
                lt - 1,
                lt
            )));
        }
        writeln!(
            out,
            "{},{},{},{}",
            format_timestamp(lt),
            fmt_float(tvar.upper()[k]),
            fmt_float(tvar.lower()[k]),
            labels.labels[i]
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_probability_csv(path: &Path, probs: &ProbabilitySeries) -> Result<()> {
    let mut out = String::from("timestamp,p\n");
    for (t, p) in probs.timestamps().iter().zip(probs.values()) {
        writeln!(out, "{},{}", format_timestamp(*t), fmt_float(*p)).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_probability_csv(path: &Path) -> Result<ProbabilitySeries> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("timestamp")) {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let t = parse_timestamp(parts.next().unwrap_or(""), i + 1)?;
        let p: f64 = parts
            .next()
            .ok_or_else(|| Error::Io(format!("line {}: expected timestamp,p", i + 1)))?
            .trim()
            .parse()
            .map_err(|e| Error::Io(format!("line {}: bad probability: {e}", i + 1)))?;
        timestamps.push(t);
        values.push(p);
    }
    ProbabilitySeries::new(timestamps, values)
}

/// Recover the threshold and label series from a `tvar_label` file. The
/// thresholds come back stamped at decision time (one step before the
/// label that used them).
pub fn read_tvar_label_csv(path: &Path) -> Result<(TvarSeries, LabelSeries)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut tvar_ts = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    let mut label_ts = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("timestamp")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Io(format!(
                "line {}: expected timestamp,tvar_upper,tvar_lower,label",
                i + 1
            )));
        }
        let t = parse_timestamp(fields[0], i + 1)?;
        let up: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|e| Error::Io(format!("line {}: bad threshold: {e}", i + 1)))?;
        let lo: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| Error::Io(format!("line {}: bad threshold: {e}", i + 1)))?;
        let y: u8 = fields[3]
            .trim()
            .parse()
            .map_err(|e| Error::Io(format!("line {}: bad label: {e}", i + 1)))?;
        tvar_ts.push(t - 1);
        upper.push(up);
        lower.push(lo);
        label_ts.push(t);
        labels.push(y);
    }
    Ok((
        TvarSeries::new(tvar_ts, upper, lower)?,
        LabelSeries {
            timestamps: label_ts,
            labels,
        },
    ))
}

/// Write a generic timestamped value column with a caller-chosen header.
pub fn write_series_csv(
    path: &Path,
    value_header: &str,
    timestamps: &[i64],
    values: &[f64],
) -> Result<()> {
    if timestamps.len() != values.len() {
        return Err(Error::Misaligned("series lengths differ".into()));
    }
    let mut out = format!("timestamp,{value_header}\n");
    for (t, v) in timestamps.iter().zip(values) {
        writeln!(out, "{},{}", format_timestamp(*t), fmt_float(*v)).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Read a two-column timestamped value file regardless of its header.
pub fn read_series_csv(path: &Path) -> Result<(Vec<i64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("timestamp")) {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let t = parse_timestamp(parts.next().unwrap_or(""), i + 1)?;
        let v: f64 = parts
            .next()
            .ok_or_else(|| Error::Io(format!("line {}: expected two columns", i + 1)))?
            .trim()
            .parse()
            .map_err(|e| Error::Io(format!("line {}: bad value: {e}", i + 1)))?;
        timestamps.push(t);
        values.push(v);
    }
    Ok((timestamps, values))
}

/// Serialize any parameter container to pretty JSON.
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    std::fs::write(path, json).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}
