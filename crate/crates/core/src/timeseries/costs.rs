//! Unconditional misclassification costs of the 3-class labeling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{LabelSeries, ReturnSeries};

/// Per-class mean returns and frequencies, with the derived false- and
/// true-positive costs `cF = r0*p0 + r1*p1` and `cT = -r2*p2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub class_means: [f64; 3],
    pub class_weights: [f64; 3],
    pub false_positive_cost: f64,
    pub true_positive_cost: f64,
    /// Set when some class had no members; its mean was reported as zero.
    pub empty_class: bool,
}

/// Estimate the cost matrix from labeled returns. Labels must be a
/// timestamp-subset of the return series; every class may be empty, in
/// which case its mean is zero and the flag is raised.
pub fn class_costs(returns: &ReturnSeries, labels: &LabelSeries) -> Result<CostMatrix> {
    if labels.is_empty() {
        return Err(Error::NotEnoughData {
            what: "labels",
            need: 1,
            have: 0,
        });
    }
    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    let mut j = 0usize;
    let rts = returns.timestamps();
    for (i, &t) in labels.timestamps.iter().enumerate() {
        while j < rts.len() && rts[j] < t {
            j += 1;
        }
        if j == rts.len() || rts[j] != t {
            return Err(Error::Misaligned(format!(
                "label timestamp {t} not found in returns"
            )));
        }
        let k = labels.labels[i] as usize;
        sums[k] += returns.values()[j];
        counts[k] += 1;
    }
    let total = labels.len() as f64;
    let mut means = [0.0f64; 3];
    let mut weights = [0.0f64; 3];
    let mut empty = false;
    for k in 0..3 {
        weights[k] = counts[k] as f64 / total;
        if counts[k] == 0 {
            empty = true;
        } else {
            means[k] = sums[k] / counts[k] as f64;
        }
    }
    Ok(CostMatrix {
        class_means: means,
        class_weights: weights,
        false_positive_cost: means[0] * weights[0] + means[1] * weights[1],
        true_positive_cost: -means[2] * weights[2],
        empty_class: empty,
    })
}
