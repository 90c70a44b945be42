//! Fee-aware backtesting and annualized performance statistics.
//!
//! The period return is `R_t = w_{t-1} r_t - fee * |w_t - w_{t-1}|`: the
//! position decided at the previous stamp earns the period's return and
//! the rebalance at the period's end pays a proportional fee on the traded
//! fraction of current equity. Entering from flat at the first stamp costs
//! one entry fee, deducted from initial equity before the first period; no
//! exit fee is charged at the end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strategy::SignalSeries;
use crate::timeseries::{ReturnSeries, TvarSeries};

/// Hours in a year; hourly data annualizes with this factor.
pub const PERIODS_PER_YEAR: f64 = 8760.0;

/// Annualized performance statistics of a strategy-return series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub average_return: f64,
    pub total_return_annualized: f64,
    pub volatility: f64,
    pub sharpe: f64,
    /// `f64::INFINITY` when no negative returns exist; see the flag.
    pub sortino: f64,
    pub sortino_degenerate: bool,
    pub max_drawdown: f64,
}

/// Full backtest output: path, ledger-level aggregates and statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestReport {
    /// Period-end stamps of each strategy return.
    pub timestamps: Vec<i64>,
    /// Position held during each period.
    pub positions: Vec<f64>,
    pub strategy_returns: Vec<f64>,
    /// Equity after each period; starts from 1 net of the entry fee.
    pub equity: Vec<f64>,
    pub trade_count: usize,
    /// `fee_rate` times the total traded fraction, entry included.
    pub fee_paid: f64,
    pub stats: SummaryStats,
    /// Filled in by [`strategy_exceedance`] when a risk target is at hand.
    pub exceedance: Option<ExceedanceCheck>,
}

/// Realized breach rate of the strategy against the target, and whether it
/// stays within the investor's risk level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceCheck {
    pub rate: f64,
    pub passes: bool,
}

/// Run the ledger. Signal stamps must each be followed by a return stamped
/// exactly one series step later over the whole overlap.
pub fn backtest(
    signals: &SignalSeries,
    returns: &ReturnSeries,
    fee_rate: f64,
) -> Result<BacktestReport> {
    if signals.is_empty() {
        return Err(Error::NotEnoughData {
            what: "signals",
            need: 1,
            have: 0,
        });
    }
    let rts = returns.timestamps();
    let rvs = returns.values();

    // locate the return immediately following each signal stamp
    let first = signals.timestamps()[0];
    let mut j = match rts.iter().position(|&t| t > first) {
        Some(j) => j,
        None => {
            return Err(Error::Misaligned(
                "no return follows the first signal".into(),
            ))
        }
    };

    let mut equity = 1.0;
    let mut fee_paid = 0.0;
    let mut trade_count = 0usize;

    // entry trade at the first stamp, from flat
    let entry = signals.positions()[0];
    if entry != 0.0 {
        fee_paid += fee_rate * entry;
        equity *= 1.0 - fee_rate * entry;
        trade_count += 1;
    }
    let mut prev_pos = entry;

    let mut timestamps = Vec::with_capacity(signals.len());
    let mut positions = Vec::with_capacity(signals.len());
    let mut strategy_returns = Vec::with_capacity(signals.len());
    let mut equity_curve = Vec::with_capacity(signals.len());

    for i in 1..=signals.len() {
        if j >= rts.len() {
            break; // signals extend past the data; trailing decisions idle
        }
        // the period (t_i-1, t_i]: return stamped rts[j]
        let expected_next = signals.timestamps()[i - 1];
        if rts[j] <= expected_next {
            return Err(Error::Misaligned(format!(
                "return stamped {} does not follow signal stamped {}",
                rts[j], expected_next
            )));
        }
        let new_pos = if i < signals.len() {
            if signals.timestamps()[i] != rts[j] {
                return Err(Error::Misaligned(format!(
                    "signal stamps must match the return grid: expected {}, got {}",
                    rts[j],
                    signals.timestamps()[i]
                )));
            }
            signals.positions()[i]
        } else {
            prev_pos // final period: hold
        };
        let turnover = (new_pos - prev_pos).abs();
        let r = prev_pos * rvs[j] - fee_rate * turnover;
        if turnover > 0.0 {
            trade_count += 1;
            fee_paid += fee_rate * turnover;
        }
        equity *= 1.0 + r;
        timestamps.push(rts[j]);
        positions.push(prev_pos);
        strategy_returns.push(r);
        equity_curve.push(equity);
        prev_pos = new_pos;
        j += 1;
    }

    if strategy_returns.is_empty() {
        return Err(Error::Misaligned(
            "signals and returns have no tradable overlap".into(),
        ));
    }
    let stats = summary_stats(&strategy_returns, PERIODS_PER_YEAR)?;
    Ok(BacktestReport {
        timestamps,
        positions,
        strategy_returns,
        equity: equity_curve,
        trade_count,
        fee_paid,
        stats,
        exceedance: None,
    })
}

/// Annualized statistics over per-period strategy returns.
pub fn summary_stats(returns: &[f64], periods_per_year: f64) -> Result<SummaryStats> {
    if returns.len() < 2 {
        return Err(Error::NotEnoughData {
            what: "strategy returns",
            need: 2,
            have: returns.len(),
        });
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    let vol = var.sqrt() * periods_per_year.sqrt();
    let ann_mean = mean * periods_per_year;

    let downside_sq = returns.iter().map(|&r| r.min(0.0).powi(2)).sum::<f64>() / n;
    let downside = downside_sq.sqrt() * periods_per_year.sqrt();
    let (sortino, sortino_degenerate) = if downside > 0.0 {
        (ann_mean / downside, false)
    } else {
        (f64::INFINITY, true)
    };

    let mut equity = 1.0;
    let mut peak = 1.0;
    let mut mdd = 0.0f64;
    for &r in returns {
        equity *= 1.0 + r;
        if equity > peak {
            peak = equity;
        }
        mdd = mdd.max((peak - equity) / peak);
    }
    let total_return_annualized = equity.powf(periods_per_year / n) - 1.0;

    Ok(SummaryStats {
        average_return: mean,
        total_return_annualized,
        volatility: vol,
        sharpe: if vol > 0.0 { ann_mean / vol } else { f64::INFINITY * ann_mean.signum() },
        sortino,
        sortino_degenerate,
        max_drawdown: mdd,
    })
}

/// Fraction of periods whose strategy loss reaches the target applicable
/// to them; passes when at or below the investor's risk level.
pub fn strategy_exceedance(
    strategy_returns: &ReturnSeries,
    tvar: &TvarSeries,
    alpha: f64,
) -> Result<ExceedanceCheck> {
    let aligned = tvar.align(strategy_returns)?;
    let breaches = aligned.iter().filter(|a| -a.ret >= a.upper).count();
    let rate = breaches as f64 / aligned.len() as f64;
    Ok(ExceedanceCheck {
        rate,
        passes: rate <= alpha,
    })
}
