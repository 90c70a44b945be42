//! Price and log-return series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Timestamped close prices, hourly cadence. Timestamps are epoch-hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    timestamps: Vec<i64>,
    closes: Vec<f64>,
}

impl PriceSeries {
    /// Build a validated series: strictly increasing timestamps, positive
    /// finite closes, length >= 2. The error carries the offending index.
    pub fn new(timestamps: Vec<i64>, closes: Vec<f64>) -> Result<Self> {
        if timestamps.len() != closes.len() {
            return Err(Error::Misaligned(format!(
                "{} timestamps vs {} closes",
                timestamps.len(),
                closes.len()
            )));
        }
        if closes.len() < 2 {
            return Err(Error::NotEnoughData {
                what: "price series",
                need: 2,
                have: closes.len(),
            });
        }
        for (i, &c) in closes.iter().enumerate() {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidSeries {
                    index: i,
                    reason: format!("non-positive or non-finite close {c}"),
                });
            }
        }
        for i in 1..timestamps.len() {
            if timestamps[i] <= timestamps[i - 1] {
                return Err(Error::InvalidSeries {
                    index: i,
                    reason: "timestamps not strictly increasing".into(),
                });
            }
        }
        Ok(Self { timestamps, closes })
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }
}

/// One-period log-returns. Entry `i` covers the period ending at
/// `timestamps[i]`; the series is one shorter than the prices it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    timestamps: Vec<i64>,
    values: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(timestamps: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::Misaligned(format!(
                "{} timestamps vs {} values",
                timestamps.len(),
                values.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidSeries {
                    index: i,
                    reason: format!("non-finite return {v}"),
                });
            }
        }
        for i in 1..timestamps.len() {
            if timestamps[i] <= timestamps[i - 1] {
                return Err(Error::InvalidSeries {
                    index: i,
                    reason: "timestamps not strictly increasing".into(),
                });
            }
        }
        Ok(Self { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The loss series: elementwise negation, same stamps.
    pub fn losses(&self) -> ReturnSeries {
        ReturnSeries {
            timestamps: self.timestamps.clone(),
            values: self.values.iter().map(|r| -r).collect(),
        }
    }

    /// Index-sliced copy over `[start, end)`.
    pub fn slice_range(&self, start: usize, end: usize) -> ReturnSeries {
        ReturnSeries {
            timestamps: self.timestamps[start..end].to_vec(),
            values: self.values[start..end].to_vec(),
        }
    }

    /// Restrict to timestamps in `[from, to]` (inclusive).
    pub fn slice_by_time(&self, from: i64, to: i64) -> ReturnSeries {
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for (&t, &v) in self.timestamps.iter().zip(&self.values) {
            if t >= from && t <= to {
                ts.push(t);
                vs.push(v);
            }
        }
        ReturnSeries {
            timestamps: ts,
            values: vs,
        }
    }
}

/// Estimated exceedance probabilities per timestamp, from any classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilitySeries {
    timestamps: Vec<i64>,
    values: Vec<f64>,
}

impl ProbabilitySeries {
    pub fn new(timestamps: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::Misaligned(format!(
                "{} timestamps vs {} probabilities",
                timestamps.len(),
                values.len()
            )));
        }
        for (i, &p) in values.iter().enumerate() {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidSeries {
                    index: i,
                    reason: format!("probability {p} outside [0, 1]"),
                });
            }
        }
        Ok(Self { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// r_t = ln(P_t / P_{t-1}) for each consecutive close pair.
pub fn log_returns(prices: &PriceSeries) -> ReturnSeries {
    let closes = prices.closes();
    let values: Vec<f64> = closes.windows(2).map(|p| (p[1] / p[0]).ln()).collect();
    let timestamps = prices.timestamps()[1..].to_vec();
    // Positivity was enforced at construction, so the ratios are finite.
    ReturnSeries { timestamps, values }
}
