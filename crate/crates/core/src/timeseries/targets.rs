//! Rolling historical-VaR risk targets, exceedance accounting, 3-class
//! labels, perfect-foresight hedge signals and the minimum-TPR bound.
//!
//! Conventions, pinned here and relied on by every downstream module:
//!
//! * The upper threshold at risk level `alpha` is the order statistic of the
//!   window's losses at (1-based) rank `ceil((1 - alpha) * w)` — no
//!   interpolation. The lower (gain-side) threshold is the rank
//!   `ceil(alpha * w)` order statistic of the same losses.
//! * A `TvarSeries` entry is stamped at the *decision time* `t`: it is
//!   computed from returns up to and including `t` and applies to the return
//!   over `(t, t+1]`. Alignment with that next return is done by
//!   [`TvarSeries::align`]; the one-slot shift is therefore impossible to
//!   get wrong at call sites.
//! * Exceedance and hedge signals use `>=` against the threshold; class
//!   labels use the strict inequalities of their defining cases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::ReturnSeries;

/// An investor risk preference: level `alpha` and rolling window `w` hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskTargetSpec {
    pub alpha: f64,
    pub window: usize,
}

impl RiskTargetSpec {
    pub fn new(alpha: f64, window: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::InvalidParams(format!(
                "alpha must lie in (0, 0.5), got {alpha}"
            )));
        }
        if window < 2 {
            return Err(Error::InvalidParams(format!(
                "window must be >= 2, got {window}"
            )));
        }
        Ok(Self { alpha, window })
    }
}

/// Rolling loss-quantile thresholds, stamped at decision time.
///
/// `upper[i]` is the loss-tail target and `lower[i]` the gain-tail target
/// computed from the window ending at `timestamps[i]`; both apply to the
/// following period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvarSeries {
    timestamps: Vec<i64>,
    upper: Vec<f64>,
    lower: Vec<f64>,
}

impl TvarSeries {
    pub fn new(timestamps: Vec<i64>, upper: Vec<f64>, lower: Vec<f64>) -> Result<Self> {
        if timestamps.len() != upper.len() || upper.len() != lower.len() {
            return Err(Error::Misaligned("tvar component lengths differ".into()));
        }
        Ok(Self {
            timestamps,
            upper,
            lower,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Pair each threshold with the return it applies to: the entry stamped
    /// `t` is matched with the first return stamped after `t`. Thresholds
    /// with no following return (the final stamp) are dropped.
    pub fn align<'a>(&'a self, returns: &'a ReturnSeries) -> Result<Vec<AlignedTarget>> {
        let rts = returns.timestamps();
        let rvs = returns.values();
        let mut out = Vec::with_capacity(self.len());
        let mut j = 0usize;
        for i in 0..self.len() {
            let t = self.timestamps[i];
            while j < rts.len() && rts[j] <= t {
                j += 1;
            }
            if j == rts.len() {
                break;
            }
            out.push(AlignedTarget {
                timestamp: rts[j],
                ret: rvs[j],
                upper: self.upper[i],
                lower: self.lower[i],
            });
        }
        if out.is_empty() {
            return Err(Error::Misaligned(
                "no overlap between thresholds and following returns".into(),
            ));
        }
        Ok(out)
    }
}

/// One (threshold, applied return) pair produced by [`TvarSeries::align`].
/// `timestamp` is the stamp of the return, i.e. decision time plus one slot.
#[derive(Debug, Clone, Copy)]
pub struct AlignedTarget {
    pub timestamp: i64,
    pub ret: f64,
    pub upper: f64,
    pub lower: f64,
}

/// 3-class outcome per timestamp: 0 interior, 1 gain tail, 2 loss tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSeries {
    pub timestamps: Vec<i64>,
    pub labels: Vec<u8>,
}

impl LabelSeries {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Perfect-foresight hedge signals, stamped at decision time.
/// `sell[i] = true` means step out of the market for the following period.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySignals {
    pub timestamps: Vec<i64>,
    pub sell: Vec<bool>,
}

/// Rolling historical VaR of the loss series for both tails.
///
/// For every window of `spec.window` consecutive returns the sorted losses
/// are read at the two ranks described in the module docs. The result is
/// stamped at the window's last timestamp.
pub fn rolling_hist_var(returns: &ReturnSeries, spec: &RiskTargetSpec) -> Result<TvarSeries> {
    let n = returns.len();
    let w = spec.window;
    if n <= w {
        return Err(Error::WindowTooLong { window: w, len: n });
    }
    // 1-based order-statistic ranks.
    let upper_rank = (((1.0 - spec.alpha) * w as f64).ceil() as usize).clamp(1, w);
    let lower_rank = ((spec.alpha * w as f64).ceil() as usize).clamp(1, w);

    let losses: Vec<f64> = returns.values().iter().map(|r| -r).collect();

    // Sliding sorted window: binary-search insert/remove keeps each step at
    // O(w) worst case, far below the O(w log w) per-window re-sort oracle.
    let mut sorted: Vec<f64> = losses[..w].to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut timestamps = Vec::with_capacity(n - w + 1);
    let mut upper = Vec::with_capacity(n - w + 1);
    let mut lower = Vec::with_capacity(n - w + 1);

    let push = |sorted: &[f64], end: usize, ts: &mut Vec<i64>, up: &mut Vec<f64>, lo: &mut Vec<f64>| {
        ts.push(returns.timestamps()[end]);
        up.push(sorted[upper_rank - 1]);
        lo.push(sorted[lower_rank - 1]);
    };

    push(&sorted, w - 1, &mut timestamps, &mut upper, &mut lower);
    for end in w..n {
        let old = losses[end - w];
        let pos = sorted
            .binary_search_by(|x| x.partial_cmp(&old).unwrap())
            .unwrap_or_else(|p| p);
        sorted.remove(pos);
        let new = losses[end];
        let pos = sorted
            .binary_search_by(|x| x.partial_cmp(&new).unwrap())
            .unwrap_or_else(|p| p);
        sorted.insert(pos, new);
        push(&sorted, end, &mut timestamps, &mut upper, &mut lower);
    }

    TvarSeries::new(timestamps, upper, lower)
}

/// Realized fraction of aligned periods whose loss reaches the target:
/// `(1/n) * sum 1[-r >= upper]`.
pub fn exceedance_rate(returns: &ReturnSeries, tvar: &TvarSeries) -> Result<f64> {
    let aligned = tvar.align(returns)?;
    let hits = aligned.iter().filter(|a| -a.ret >= a.upper).count();
    Ok(hits as f64 / aligned.len() as f64)
}

/// 3-class labels: 2 iff `-r > upper`, 1 iff `-r < lower`, 0 otherwise.
pub fn make_labels(returns: &ReturnSeries, tvar: &TvarSeries) -> Result<LabelSeries> {
    let aligned = tvar.align(returns)?;
    let mut timestamps = Vec::with_capacity(aligned.len());
    let mut labels = Vec::with_capacity(aligned.len());
    for a in &aligned {
        let loss = -a.ret;
        let y = if loss > a.upper {
            2
        } else if loss < a.lower {
            1
        } else {
            0
        };
        timestamps.push(a.timestamp);
        labels.push(y);
    }
    Ok(LabelSeries { timestamps, labels })
}

/// Perfect-foresight signals: sell at `t` iff the next loss reaches the
/// target (`>=`). The resulting hedged return never breaches the target.
pub fn oracle_signals(returns: &ReturnSeries, tvar: &TvarSeries) -> Result<BinarySignals> {
    let aligned = tvar.align(returns)?;
    let mut timestamps = Vec::with_capacity(aligned.len());
    let mut sell = Vec::with_capacity(aligned.len());
    for a in &aligned {
        // Stamp back at decision time: one slot before the applied return.
        timestamps.push(a.timestamp - 1);
        sell.push(-a.ret >= a.upper);
    }
    Ok(BinarySignals { timestamps, sell })
}

/// Minimum true-positive rate a classifier must reach so that hedging on its
/// signals keeps the strategy exceedance at or below `alpha`:
/// `(exceedance - alpha) / exceedance`, clamped to `[0, 1]`; vacuous (0)
/// when the asset already exceeds no more often than `alpha`.
pub fn min_tpr(exceedance: f64, alpha: f64) -> f64 {
    if exceedance <= 0.0 || exceedance <= alpha {
        return 0.0;
    }
    ((exceedance - alpha) / exceedance).clamp(0.0, 1.0)
}
