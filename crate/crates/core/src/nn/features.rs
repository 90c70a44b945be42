//! Momentum-style input features for the network classifiers.
//!
//! Per timestamp `t` the base vector has 8 entries:
//! multi-period simple returns `X_t^p = P_t / P_{t-1-p} - 1` for lags
//! `p in {0, 1, 2, 4, 6, 13}` (recovered from log-returns as
//! `exp(sum of the last p+1 log-returns) - 1`), then the two normalized
//! threshold distances `D_t = (r_t - lower_t) / lower_t` and
//! `U_t = (r_t - upper_t) / upper_t`, where the thresholds are the ones
//! applicable at `t` (computed from data through `t - 1`).
//!
//! The recurrent variant stacks the trailing 24 base vectors per row; the
//! threshold distances inside a block all use the block's final-timestamp
//! thresholds with lagged returns.

use crate::error::{Error, Result};
use crate::timeseries::{ReturnSeries, TvarSeries};

pub const LAGS: [usize; 6] = [0, 1, 2, 4, 6, 13];
pub const BASE_FEATURES: usize = 8;
pub const SEQ_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureVariant {
    Mlp,
    Lstm,
}

/// Row-major feature rows aligned to timestamps. Recurrent rows are
/// `SEQ_LEN x BASE_FEATURES` blocks flattened step-major.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub timestamps: Vec<i64>,
    pub rows: Vec<f64>,
    pub row_len: usize,
    pub variant: FeatureVariant,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.row_len..(i + 1) * self.row_len]
    }
}

/// Build the feature matrix on the range where both the thresholds and the
/// required return history exist.
pub fn build_features(
    returns: &ReturnSeries,
    tvar: &TvarSeries,
    variant: FeatureVariant,
) -> Result<FeatureMatrix> {
    let aligned = tvar.align(returns)?;
    let values = returns.values();
    let ts = returns.timestamps();

    // index of each aligned return in the underlying series
    let mut idx = Vec::with_capacity(aligned.len());
    {
        let mut j = 0usize;
        for a in &aligned {
            while ts[j] != a.timestamp {
                j += 1;
            }
            idx.push(j);
        }
    }

    // prefix sums of log-returns for multi-period simple returns
    let mut cumsum = vec![0.0f64; values.len() + 1];
    for (i, &r) in values.iter().enumerate() {
        cumsum[i + 1] = cumsum[i] + r;
    }
    let multi_period = |end: usize, p: usize| -> f64 {
        // P_end / P_{end-1-p} - 1 over log-returns [end-p ..= end]
        (cumsum[end + 1] - cumsum[end - p]).exp() - 1.0
    };

    let max_lag = *LAGS.last().unwrap();
    let history_needed = match variant {
        FeatureVariant::Mlp => max_lag,
        FeatureVariant::Lstm => max_lag + SEQ_LEN - 1,
    };

    let row_len = match variant {
        FeatureVariant::Mlp => BASE_FEATURES,
        FeatureVariant::Lstm => SEQ_LEN * BASE_FEATURES,
    };
    let mut timestamps = Vec::new();
    let mut rows = Vec::new();

    for (a, &i) in aligned.iter().zip(&idx) {
        if i < history_needed {
            continue;
        }
        if a.upper == 0.0 || a.lower == 0.0 {
            return Err(Error::Degenerate(format!(
                "zero threshold at timestamp {}: normalized distances undefined",
                a.timestamp
            )));
        }
        match variant {
            FeatureVariant::Mlp => {
                for &p in &LAGS {
                    rows.push(multi_period(i, p));
                }
                rows.push((values[i] - a.lower) / a.lower);
                rows.push((values[i] - a.upper) / a.upper);
            }
            FeatureVariant::Lstm => {
                for s in 0..SEQ_LEN {
                    let j = i + 1 - SEQ_LEN + s;
                    for &p in &LAGS {
                        rows.push(multi_period(j, p));
                    }
                    rows.push((values[j] - a.lower) / a.lower);
                    rows.push((values[j] - a.upper) / a.upper);
                }
            }
        }
        timestamps.push(a.timestamp);
    }

    if timestamps.is_empty() {
        return Err(Error::NotEnoughData {
            what: "feature history",
            need: history_needed + 1,
            have: aligned.len(),
        });
    }
    Ok(FeatureMatrix {
        timestamps,
        rows,
        row_len,
        variant,
    })
}
