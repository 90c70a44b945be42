//! Benchmark strategies: buy-and-hold, ratio-capped target-VaR under a
//! normal or EVT tail, the model-disagreement Varspread rule, and the
//! trend-switching composite.

use crate::econ::garch::VolForecast;
use crate::econ::gpd::{loss_quantile_evt, loss_quantile_normal, GpdParams};
use crate::error::{Error, Result};
use crate::strategy::SignalSeries;
use crate::timeseries::{PriceSeries, TvarSeries};

/// Fully invested at every decision stamp.
pub fn benchmark_buy_hold(decision_stamps: &[i64]) -> Result<SignalSeries> {
    SignalSeries::new(decision_stamps.to_vec(), vec![1.0; decision_stamps.len()])
}

/// Tail model for the one-step VaR estimate behind the target-VaR rule.
pub enum TailQuantile<'a> {
    Normal,
    /// One fitted tail per forecast entry.
    Evt(&'a [GpdParams]),
}

/// Scale exposure so the position's VaR matches the target:
/// `w = clamp(TVaR / VaR_hat, 0, 1)`, fully invested when the model VaR is
/// non-positive.
pub fn benchmark_target_var(
    timestamps: &[i64],
    forecasts: &[VolForecast],
    tvar: &TvarSeries,
    alpha: f64,
    tail: TailQuantile,
) -> Result<SignalSeries> {
    if timestamps.len() != forecasts.len() {
        return Err(Error::Misaligned(format!(
            "{} stamps vs {} forecasts",
            timestamps.len(),
            forecasts.len()
        )));
    }
    if let TailQuantile::Evt(gpds) = &tail {
        if gpds.len() != forecasts.len() {
            return Err(Error::Misaligned(format!(
                "{} tail fits vs {} forecasts",
                gpds.len(),
                forecasts.len()
            )));
        }
    }
    let var_hats: Vec<f64> = forecasts
        .iter()
        .enumerate()
        .map(|(i, f)| match &tail {
            TailQuantile::Normal => loss_quantile_normal(f, alpha),
            TailQuantile::Evt(gpds) => loss_quantile_evt(f, &gpds[i], alpha),
        })
        .collect();
    target_var_positions(timestamps, &var_hats, tvar)
}

/// The ratio-capped rule on precomputed model VaR estimates.
pub fn target_var_positions(
    timestamps: &[i64],
    var_hats: &[f64],
    tvar: &TvarSeries,
) -> Result<SignalSeries> {
    if timestamps.len() != var_hats.len() {
        return Err(Error::Misaligned(format!(
            "{} stamps vs {} VaR estimates",
            timestamps.len(),
            var_hats.len()
        )));
    }
    let mut positions = Vec::with_capacity(var_hats.len());
    let mut out_ts = Vec::with_capacity(var_hats.len());
    let mut k = 0usize;
    for (&t, &var_hat) in timestamps.iter().zip(var_hats) {
        // target applicable to the same upcoming period
        while k < tvar.len() && tvar.timestamps()[k] < t {
            k += 1;
        }
        if k == tvar.len() {
            break;
        }
        if tvar.timestamps()[k] != t {
            continue;
        }
        let target = tvar.upper()[k];
        let w = if var_hat <= 0.0 {
            1.0
        } else {
            (target / var_hat).clamp(0.0, 1.0)
        };
        out_ts.push(t);
        positions.push(w);
    }
    if out_ts.is_empty() {
        return Err(Error::Misaligned(
            "forecasts and risk targets share no stamps".into(),
        ));
    }
    SignalSeries::new(out_ts, positions)
}

/// Exit the market while the rolling z-score of the EVT-vs-normal VaR
/// spread exceeds the critical value; hold otherwise. The window is
/// trailing and includes the current spread; a zero dispersion gives z = 0.
pub fn benchmark_varspread(
    timestamps: &[i64],
    var_norm: &[f64],
    var_evt: &[f64],
    window: usize,
    z_crit: f64,
) -> Result<SignalSeries> {
    if timestamps.len() != var_norm.len() || var_norm.len() != var_evt.len() {
        return Err(Error::Misaligned(
            "VaR series lengths differ".into(),
        ));
    }
    if window < 2 {
        return Err(Error::InvalidParams("varspread window must be >= 2".into()));
    }
    let spreads: Vec<f64> = var_evt.iter().zip(var_norm).map(|(e, n)| e - n).collect();
    let mut positions = Vec::with_capacity(spreads.len());
    for i in 0..spreads.len() {
        let lo = (i + 1).saturating_sub(window);
        let win = &spreads[lo..=i];
        let n = win.len() as f64;
        let mean = win.iter().sum::<f64>() / n;
        let z = if win.len() < 2 {
            0.0
        } else {
            let var = win.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
            let sd = var.sqrt();
            if sd > 0.0 {
                (spreads[i] - mean) / sd
            } else {
                0.0
            }
        };
        positions.push(if z > z_crit { 0.0 } else { 1.0 });
    }
    SignalSeries::new(timestamps.to_vec(), positions)
}

/// Trend-switched composite: follow the aggressive strategy when the
/// previous price sits above its n-period moving average, the defensive
/// one otherwise (ties count as downtrend). Decision stamps without enough
/// price history fall back to the defensive leg.
pub fn switch_strategy(
    prices: &PriceSeries,
    aggressive: &SignalSeries,
    defensive: &SignalSeries,
    ma_len: usize,
) -> Result<SignalSeries> {
    if ma_len == 0 {
        return Err(Error::InvalidParams("moving-average length must be >= 1".into()));
    }
    let pts = prices.timestamps();
    let pvs = prices.closes();

    // prefix sums for O(1) moving averages
    let mut prefix = vec![0.0f64; pvs.len() + 1];
    for (i, &p) in pvs.iter().enumerate() {
        prefix[i + 1] = prefix[i] + p;
    }

    let mut out_ts = Vec::new();
    let mut positions = Vec::new();
    let mut db = 0usize;
    for (i, &t) in aggressive.timestamps().iter().enumerate() {
        while db < defensive.timestamps().len() && defensive.timestamps()[db] < t {
            db += 1;
        }
        if db == defensive.timestamps().len() {
            break;
        }
        if defensive.timestamps()[db] != t {
            continue;
        }
        let Ok(j) = pts.binary_search(&t) else {
            continue;
        };
        // trend test uses the previous price against the average of the
        // ma_len prices ending there
        let uptrend = if j >= ma_len {
            let ma = (prefix[j] - prefix[j - ma_len]) / ma_len as f64;
            pvs[j - 1] > ma
        } else {
            false
        };
        let w = if uptrend {
            aggressive.positions()[i]
        } else {
            defensive.positions()[db]
        };
        out_ts.push(t);
        positions.push(w);
    }
    if out_ts.is_empty() {
        return Err(Error::Misaligned(
            "strategies share no decision stamps on the price grid".into(),
        ));
    }
    SignalSeries::new(out_ts, positions)
}
