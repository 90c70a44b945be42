//! Trading-side machinery: threshold selection under the tail-loss
//! constraint, fee-aware backtesting, benchmark strategies and the
//! trend-switching overlay.

mod backtest;
mod benchmarks;
mod threshold;

pub use backtest::{
    backtest, strategy_exceedance, summary_stats, BacktestReport, ExceedanceCheck, SummaryStats,
};
pub use benchmarks::{
    benchmark_buy_hold, benchmark_target_var, benchmark_varspread, switch_strategy,
    target_var_positions, TailQuantile,
};
pub use threshold::{signals_from_probabilities, threshold_select, ThresholdChoice};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positions in `[0, 1]` stamped at decision time: the weight stamped `t`
/// is held over the following period `(t, t+1]`. 1 is fully invested; a
/// binary hedger holds `1 - s_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSeries {
    timestamps: Vec<i64>,
    positions: Vec<f64>,
}

impl SignalSeries {
    pub fn new(timestamps: Vec<i64>, positions: Vec<f64>) -> Result<Self> {
        if timestamps.len() != positions.len() {
            return Err(Error::Misaligned(format!(
                "{} timestamps vs {} positions",
                timestamps.len(),
                positions.len()
            )));
        }
        for (i, &w) in positions.iter().enumerate() {
            if !(w.is_finite() && (0.0..=1.0).contains(&w)) {
                return Err(Error::InvalidSeries {
                    index: i,
                    reason: format!("position {w} outside [0, 1]"),
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
        Ok(Self {
            timestamps,
            positions,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }
}

impl crate::timeseries::BinarySignals {
    /// The hedged position path `1 - s_t` implied by binary sell signals.
    pub fn positions(&self) -> SignalSeries {
        SignalSeries {
            timestamps: self.timestamps.clone(),
            positions: self.sell.iter().map(|&s| if s { 0.0 } else { 1.0 }).collect(),
        }
    }
}
