//! Expanding-window splits for time-series cross-validation.

use std::ops::Range;

use crate::error::{Error, Result};

/// Expanding-window folds: `train = [0, k)`, `test = [k, k + fold_len)` for
/// `k = min_train, min_train + fold_len, ...`. Test ranges are disjoint,
/// ordered, and always follow their training range.
pub fn time_series_folds(
    n: usize,
    fold_len: usize,
    min_train: usize,
) -> Result<Vec<(Range<usize>, Range<usize>)>> {
    if fold_len == 0 || min_train == 0 {
        return Err(Error::InvalidParams(
            "fold_len and min_train must be positive".into(),
        ));
    }
    if n < min_train + fold_len {
        return Err(Error::NotEnoughData {
            what: "cross-validation folds",
            need: min_train + fold_len,
            have: n,
        });
    }
    let mut folds = Vec::new();
    let mut k = min_train;
    while k + fold_len <= n {
        folds.push((0..k, k..k + fold_len));
        k += fold_len;
    }
    Ok(folds)
}
