//! Classifier evaluation: ROC curves, AUC, and the cost-weighted variants
//! that price false and true positives in return units.
//!
//! The cost-adjusted curve rescales the ROC axes by the false-positive and
//! true-positive costs. Rescaling each axis independently back to `[0, 1]`
//! would collapse the adjustment to plain AUC, so both axes are normalized
//! jointly by `m = max(cF, cT)`: points become `(cF*FPR/m, cT*TPR/m)` and
//! the curve is extended horizontally to `x = 1` before the trapezoidal
//! integral. Equal costs therefore reproduce AUC exactly, and raising the
//! true-positive value never lowers the area. The normalization lives only
//! here so alternatives can be swapped in for sensitivity analysis.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::timeseries::CostMatrix;

/// ROC curve points `(FPR, TPR)` from (1,1)-anchored threshold sweep,
/// ties grouped, endpoints `(0,0)` and `(1,1)` included.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
}

/// Area report: plain and cost-adjusted, with the costs used.
#[derive(Debug, Clone)]
pub struct AaucReport {
    pub auc: f64,
    pub aauc: f64,
    pub false_positive_cost: f64,
    pub true_positive_cost: f64,
}

/// Per-fold evaluation of a metric with degenerate folds skipped.
#[derive(Debug, Clone)]
pub struct FoldedMetric {
    pub per_fold: Vec<Option<f64>>,
    pub mean: f64,
    /// Population variance across the evaluated folds.
    pub variance: f64,
    pub skipped: usize,
}

/// Standard threshold sweep with tie grouping.
pub fn roc_curve(scores: &[f64], positives: &[bool]) -> Result<RocCurve> {
    if scores.len() != positives.len() {
        return Err(Error::Misaligned(format!(
            "{} scores vs {} outcomes",
            scores.len(),
            positives.len()
        )));
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate(format!(
            "ROC needs both classes, got {n_pos} positives / {n_neg} negatives"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = Vec::with_capacity(scores.len() + 2);
    points.push((0.0, 0.0));
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0usize;
    while i < order.len() {
        let s = scores[order[i]];
        // absorb the whole tie group before emitting a point
        while i < order.len() && scores[order[i]] == s {
            if positives[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(RocCurve { points })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    trapezoid(&curve.points)
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Cost-adjusted area: scale the ROC points by `(cF/m, cT/m)` with
/// `m = max(cF, cT)`, extend to `x = 1`, integrate.
pub fn risk_adjusted_auc(
    scores: &[f64],
    positives: &[bool],
    costs: &CostMatrix,
) -> Result<AaucReport> {
    let cf = costs.false_positive_cost;
    let ct = costs.true_positive_cost;
    if cf <= 0.0 && ct <= 0.0 {
        return Err(Error::Degenerate(
            "both misclassification costs are zero; the adjusted area is undefined".into(),
        ));
    }
    let curve = roc_curve(scores, positives)?;
    let plain = auc(&curve);

    let m = cf.max(ct);
    // cf == ct makes both factors exactly 1, so AAUC == AUC bit for bit
    let (sx, sy) = (cf / m, ct / m);
    let mut scaled: Vec<(f64, f64)> = curve
        .points
        .iter()
        .map(|&(x, y)| (sx * x, sy * y))
        .collect();
    let last = *scaled.last().unwrap();
    if last.0 < 1.0 {
        scaled.push((1.0, last.1));
    }
    Ok(AaucReport {
        auc: plain,
        aauc: trapezoid(&scaled),
        false_positive_cost: cf,
        true_positive_cost: ct,
    })
}

/// Evaluate `metric` on each fold of the aligned `(scores, positives)`
/// arrays; single-class folds are skipped with a counter.
pub fn folded_metric<F>(
    scores: &[f64],
    positives: &[bool],
    folds: &[Range<usize>],
    metric: F,
) -> Result<FoldedMetric>
where
    F: Fn(&[f64], &[bool]) -> Result<f64>,
{
    let mut per_fold = Vec::with_capacity(folds.len());
    let mut kept = Vec::new();
    let mut skipped = 0usize;
    for fold in folds {
        match metric(&scores[fold.clone()], &positives[fold.clone()]) {
            Ok(v) => {
                per_fold.push(Some(v));
                kept.push(v);
            }
            Err(Error::Degenerate(_)) => {
                per_fold.push(None);
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if kept.is_empty() {
        return Err(Error::Degenerate("every fold was single-class".into()));
    }
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let variance = kept.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(FoldedMetric {
        per_fold,
        mean,
        variance,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn costs(cf: f64, ct: f64) -> CostMatrix {
        CostMatrix {
            class_means: [0.0; 3],
            class_weights: [1.0, 0.0, 0.0],
            false_positive_cost: cf,
            true_positive_cost: ct,
            empty_class: false,
        }
    }

    /// O(n^2) oracle: for every distinct threshold, recount the confusion
    /// matrix from scratch.
    fn brute_force_roc(scores: &[f64], positives: &[bool]) -> Vec<(f64, f64)> {
        let n_pos = positives.iter().filter(|&&p| p).count();
        let n_neg = positives.len() - n_pos;
        let mut thresholds: Vec<f64> = scores.to_vec();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        let mut points = vec![(0.0, 0.0)];
        for &u in &thresholds {
            let mut tp = 0;
            let mut fp = 0;
            for (&s, &y) in scores.iter().zip(positives) {
                if s >= u {
                    if y {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        }
        points
    }

    #[test]
    fn perfect_and_inverted_classifiers() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        let curve = roc_curve(&scores, &labels).unwrap();
        assert!(curve.points.contains(&(0.0, 1.0)));
        assert_relative_eq!(auc(&curve), 1.0);

        let inverted = [0.1, 0.2, 0.8, 0.9];
        let curve = roc_curve(&inverted, &labels).unwrap();
        assert!(curve.points.contains(&(1.0, 0.0)));
        assert_relative_eq!(auc(&curve), 0.0);
    }

    #[test]
    fn six_point_hand_example() {
        // scores sorted desc: 0.9(+), 0.8(-), 0.7(+), 0.7(+), 0.3(-), 0.1(-)
        // tie at 0.7 collapses into one step
        let scores = [0.9, 0.8, 0.7, 0.7, 0.3, 0.1];
        let labels = [true, false, true, true, false, false];
        let curve = roc_curve(&scores, &labels).unwrap();
        let expect = vec![
            (0.0, 0.0),
            (0.0, 1.0 / 3.0),
            (1.0 / 3.0, 1.0 / 3.0),
            (1.0 / 3.0, 1.0),
            (2.0 / 3.0, 1.0),
            (1.0, 1.0),
        ];
        assert_eq!(curve.points, expect);
        // trapezoid by hand: 1/3*(1/3) + 0 + 2/3*(2/3 -1/3)... direct sum
        let hand = 1.0 / 3.0 * 1.0 / 3.0 + (1.0 / 3.0) * 1.0 + (1.0 / 3.0) * 1.0;
        assert_relative_eq!(auc(&curve), hand, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_scores_give_half() {
        // constant score: single jump from (0,0) to (1,1)
        let scores = [0.5; 10];
        let labels = [true, false, true, false, true, false, true, false, true, false];
        let curve = roc_curve(&scores, &labels).unwrap();
        assert_relative_eq!(auc(&curve), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn single_class_errors() {
        assert!(roc_curve(&[0.1, 0.9], &[true, true]).is_err());
    }

    #[test]
    fn matches_brute_force_sweep() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for n in [10usize, 57, 250, 500] {
            let scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 8.0).round() / 8.0).collect();
            let labels: Vec<bool> = scores
                .iter()
                .map(|&s| rng.random::<f64>() < 0.3 + 0.4 * s)
                .collect();
            if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
                continue;
            }
            let fast = roc_curve(&scores, &labels).unwrap();
            let brute = brute_force_roc(&scores, &labels);
            assert_eq!(fast.points, brute, "n={n}");
        }
    }

    #[test]
    fn auc_invariant_under_monotone_transforms() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let scores: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let labels: Vec<bool> = scores.iter().map(|&s| rng.random::<f64>() < s).collect();
        let base = auc(&roc_curve(&scores, &labels).unwrap());
        for trial in 0..100 {
            let a = 0.1 + rng.random::<f64>();
            let b = rng.random::<f64>() * 2.0 - 1.0;
            let mapped: Vec<f64> = match trial % 4 {
                0 => scores.iter().map(|&s| a * s + b).collect(),
                1 => scores.iter().map(|&s| (a * s).exp()).collect(),
                2 => scores.iter().map(|&s| (s + 1.5).ln() * a).collect(),
                _ => scores.iter().map(|&s| s.powi(3) * a + b).collect(),
            };
            let transformed = auc(&roc_curve(&mapped, &labels).unwrap());
            assert_relative_eq!(transformed, base, epsilon = 1e-12);
        }
    }

    #[test]
    fn equal_costs_reduce_to_plain_auc() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let scores: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
        let labels: Vec<bool> = scores.iter().map(|&s| rng.random::<f64>() < s).collect();
        let report = risk_adjusted_auc(&scores, &labels, &costs(0.02, 0.02)).unwrap();
        assert_eq!(report.aauc, report.auc);
    }

    #[test]
    fn perfect_classifier_cost_geometry() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        // equal costs: area 1
        let r = risk_adjusted_auc(&scores, &labels, &costs(0.04, 0.04)).unwrap();
        assert_relative_eq!(r.aauc, 1.0, epsilon = 1e-12);
        // halved true-positive value: scaled step curve has area 0.5
        let r = risk_adjusted_auc(&scores, &labels, &costs(0.04, 0.02)).unwrap();
        assert_relative_eq!(r.aauc, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn aauc_nondecreasing_in_true_positive_cost() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let scores: Vec<f64> = (0..150).map(|_| rng.random::<f64>()).collect();
        let labels: Vec<bool> = scores.iter().map(|&s| rng.random::<f64>() < s).collect();
        let cf = 0.03;
        let mut last = -1.0;
        for i in 1..30 {
            let ct = 0.005 * i as f64;
            let r = risk_adjusted_auc(&scores, &labels, &costs(cf, ct)).unwrap();
            assert!((0.0..=1.0).contains(&r.aauc));
            assert!(r.aauc >= last - 1e-12, "aauc fell at ct={ct}");
            last = r.aauc;
        }
    }

    #[test]
    fn zero_costs_error() {
        let scores = [0.9, 0.1];
        let labels = [true, false];
        assert!(risk_adjusted_auc(&scores, &labels, &costs(0.0, 0.0)).is_err());
    }

    #[test]
    fn folds_aggregate_and_skip_degenerates() {
        let scores = [0.9, 0.1, 0.8, 0.2, 0.7, 0.7];
        let labels = [true, false, true, false, true, true];
        let folds = vec![0..2, 2..4, 4..6];
        let result = folded_metric(&scores, &labels, &folds, |s, y| {
            Ok(auc(&roc_curve(s, y)?))
        })
        .unwrap();
        // third fold is all-positive: skipped
        assert_eq!(result.skipped, 1);
        assert_eq!(result.per_fold[2], None);
        // both kept folds are perfectly separated
        assert_relative_eq!(result.mean, 1.0);
        assert_relative_eq!(result.variance, 0.0);
    }

    #[test]
    fn two_fold_hand_mean_variance() {
        // fold AUCs: 1.0 and 0.0 -> mean 0.5, population variance 0.25
        let scores = [0.9, 0.1, 0.1, 0.9];
        let labels = [true, false, true, false];
        let folds = vec![0..2, 2..4];
        let result = folded_metric(&scores, &labels, &folds, |s, y| {
            Ok(auc(&roc_curve(s, y)?))
        })
        .unwrap();
        assert_relative_eq!(result.mean, 0.5);
        assert_relative_eq!(result.variance, 0.25);
    }

    #[test]
    fn all_degenerate_folds_error() {
        let scores = [0.9, 0.8];
        let labels = [true, true];
        let folds = vec![0..2];
        assert!(folded_metric(&scores, &labels, &folds, |s, y| {
            Ok(auc(&roc_curve(s, y)?))
        })
        .is_err());
    }
}
