//! Ridge stacking of the level-0 exceedance probabilities.
//!
//! Each model's probability column is turned into a log-odds score and
//! min-max rescaled to `[0, 1]`; the meta-coefficients minimize
//!
//! ```text
//! sum_t (s_t - sum_j beta_j x_tj)^2 + lambda * sum_j beta_j^2
//! ```
//!
//! against the binary tail-event target, with `lambda = 1` by default. The
//! meta-probability is the linear score clipped to `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::ProbabilitySeries;

/// Log-odds clamp; probabilities are pulled into `[eps, 1 - eps]` first.
pub const LOGIT_EPS: f64 = 1e-6;

/// Default L2 penalty, fixed rather than tuned.
pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Observations before the online stack starts emitting predictions.
pub const DEFAULT_WARMUP: usize = 200;

/// Aligned rescaled scores and binary targets ready for the meta-fit.
#[derive(Debug, Clone)]
pub struct StackInput {
    /// Row-major `n x n_models` rescaled scores.
    pub rows: Vec<f64>,
    pub targets: Vec<f64>,
    pub n_models: usize,
}

impl StackInput {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n_models..(i + 1) * self.n_models]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeCoefficients {
    pub beta: Vec<f64>,
    pub lambda: f64,
}

fn logit(p: f64, eps: f64) -> f64 {
    let p = p.clamp(eps, 1.0 - eps);
    (p / (1.0 - p)).ln()
}

/// Clamp, take log-odds, then min-max rescale the column to `[0, 1]`.
/// A constant column maps to 0.5 everywhere so a degenerate model cannot
/// dominate the stack.
pub fn logit_rescale(p: &ProbabilitySeries, eps: f64) -> Vec<f64> {
    rescale_logit_column(&p.values().iter().map(|&v| logit(v, eps)).collect::<Vec<_>>())
}

fn rescale_logit_column(logits: &[f64]) -> Vec<f64> {
    let lo = logits.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.5; logits.len()];
    }
    logits.iter().map(|&l| (l - lo) / (hi - lo)).collect()
}

/// Solve `(X'X + lambda I) beta = X'y` by Gaussian elimination with
/// partial pivoting. `lambda > 0` keeps the system well posed.
pub fn ridge_fit(input: &StackInput, lambda: f64) -> RidgeCoefficients {
    let j = input.n_models;
    let n = input.len();
    let mut xtx = vec![0.0f64; j * j];
    let mut xty = vec![0.0f64; j];
    for i in 0..n {
        let row = input.row(i);
        let y = input.targets[i];
        for a in 0..j {
            xty[a] += row[a] * y;
            for b in a..j {
                xtx[a * j + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..j {
        for b in 0..a {
            xtx[a * j + b] = xtx[b * j + a];
        }
        xtx[a * j + a] += lambda;
    }
    let beta = solve(&mut xtx, &mut xty, j);
    RidgeCoefficients { beta, lambda }
}

fn solve(a: &mut [f64], b: &mut [f64], n: usize) -> Vec<f64> {
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[pivot * n + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * n + col].abs() < 1e-300 {
            continue; // defective direction: leave coefficient at zero
        }
        if pivot != col {
            for c in 0..n {
                a.swap(col * n + c, pivot * n + c);
            }
            b.swap(col, pivot);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= factor * a[col * n + c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let d = a[col * n + col];
        if d.abs() < 1e-300 {
            x[col] = 0.0;
            continue;
        }
        let mut acc = b[col];
        for c in col + 1..n {
            acc -= a[col * n + c] * x[c];
        }
        x[col] = acc / d;
    }
    x
}

/// Linear meta-score clipped to `[0, 1]`.
pub fn ensemble_predict(coeffs: &RidgeCoefficients, row: &[f64]) -> f64 {
    let s: f64 = coeffs.beta.iter().zip(row).map(|(b, x)| b * x).sum();
    s.clamp(0.0, 1.0)
}

/// Online stacker: collects resolved (level-0 probabilities, outcome)
/// pairs, refits on every prediction over the trailing window, and only
/// emits once the warm-up count is reached. Rescaling ranges are computed
/// from the window plus the row being predicted, so no future data enters.
#[derive(Debug, Clone)]
pub struct OnlineStacker {
    n_models: usize,
    lambda: f64,
    warmup: usize,
    window: Option<usize>,
    history: Vec<(Vec<f64>, f64)>,
}

impl OnlineStacker {
    pub fn new(n_models: usize, lambda: f64, warmup: usize, window: Option<usize>) -> Self {
        OnlineStacker {
            n_models,
            lambda,
            warmup,
            window,
            history: Vec::new(),
        }
    }

    /// Record a resolved pair: the probabilities emitted at some past time
    /// and the realized tail-event indicator of the following period.
    pub fn record(&mut self, probs: &[f64], outcome: bool) -> Result<()> {
        if probs.len() != self.n_models {
            return Err(Error::Misaligned(format!(
                "expected {} level-0 probabilities, got {}",
                self.n_models,
                probs.len()
            )));
        }
        self.history.push((probs.to_vec(), if outcome { 1.0 } else { 0.0 }));
        if let Some(w) = self.window {
            if self.history.len() > w {
                let excess = self.history.len() - w;
                self.history.drain(..excess);
            }
        }
        Ok(())
    }

    pub fn observations(&self) -> usize {
        self.history.len()
    }

    /// Fit on the recorded history and predict for `probs`. `None` until
    /// the warm-up count of resolved observations is reached.
    pub fn predict(&self, probs: &[f64]) -> Option<(f64, RidgeCoefficients)> {
        if self.history.len() < self.warmup.max(1) {
            return None;
        }
        let n = self.history.len();
        let j = self.n_models;

        // column-wise logits over history plus the current row
        let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n + 1); j];
        for (row, _) in &self.history {
            for (c, &p) in row.iter().enumerate() {
                cols[c].push(logit(p, LOGIT_EPS));
            }
        }
        for (c, &p) in probs.iter().enumerate() {
            cols[c].push(logit(p, LOGIT_EPS));
        }
        let rescaled: Vec<Vec<f64>> = cols.iter().map(|c| rescale_logit_column(c)).collect();

        let mut rows = Vec::with_capacity(n * j);
        for i in 0..n {
            for col in rescaled.iter() {
                rows.push(col[i]);
            }
        }
        let input = StackInput {
            rows,
            targets: self.history.iter().map(|(_, y)| *y).collect(),
            n_models: j,
        };
        let coeffs = ridge_fit(&input, self.lambda);
        let current: Vec<f64> = rescaled.iter().map(|c| c[n]).collect();
        Some((ensemble_predict(&coeffs, &current), coeffs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn prob_series(values: Vec<f64>) -> ProbabilitySeries {
        let ts: Vec<i64> = (0..values.len() as i64).collect();
        ProbabilitySeries::new(ts, values).unwrap()
    }

    /// Independent closed-form oracle: invert (X'X + lambda I) by
    /// Gauss-Jordan and multiply, no shared code with `ridge_fit`.
    fn normal_equations_oracle(input: &StackInput, lambda: f64) -> Vec<f64> {
        let j = input.n_models;
        let n = input.len();
        let mut m = vec![vec![0.0f64; 2 * j]; j];
        for a in 0..j {
            for b in 0..j {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += input.row(i)[a] * input.row(i)[b];
                }
                m[a][b] = acc + if a == b { lambda } else { 0.0 };
            }
            m[a][j + a] = 1.0;
        }
        // Gauss-Jordan inversion
        for col in 0..j {
            let mut pivot = col;
            for r in col + 1..j {
                if m[r][col].abs() > m[pivot][col].abs() {
                    pivot = r;
                }
            }
            m.swap(col, pivot);
            let d = m[col][col];
            for c in 0..2 * j {
                m[col][c] /= d;
            }
            for r in 0..j {
                if r != col {
                    let f = m[r][col];
                    for c in 0..2 * j {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
        let mut xty = vec![0.0; j];
        for i in 0..n {
            for a in 0..j {
                xty[a] += input.row(i)[a] * input.targets[i];
            }
        }
        (0..j)
            .map(|a| (0..j).map(|b| m[a][j + b] * xty[b]).sum())
            .collect()
    }

    fn random_input(rng: &mut ChaCha12Rng, n: usize, j: usize) -> StackInput {
        let rows: Vec<f64> = (0..n * j).map(|_| rng.random::<f64>()).collect();
        let targets: Vec<f64> = (0..n).map(|_| f64::from(rng.random::<f64>() < 0.3)).collect();
        StackInput {
            rows,
            targets,
            n_models: j,
        }
    }

    #[test]
    fn logit_of_half_is_zero_and_rescale_hits_endpoints() {
        let e = std::f64::consts::E;
        let p = prob_series(vec![1.0 / (1.0 + e), 0.5, e / (1.0 + e)]);
        // logits are exactly -1, 0, +1
        let scores = logit_rescale(&p, LOGIT_EPS);
        assert_relative_eq!(scores[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(scores[1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(scores[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn clamped_boundaries_stay_finite() {
        let p = prob_series(vec![0.0, 1.0, 0.5]);
        let scores = logit_rescale(&p, LOGIT_EPS);
        assert!(scores.iter().all(|s| s.is_finite()));
        assert_relative_eq!(scores[0], 0.0);
        assert_relative_eq!(scores[1], 1.0);
    }

    #[test]
    fn constant_column_becomes_one_half() {
        let p = prob_series(vec![0.3; 10]);
        let scores = logit_rescale(&p, LOGIT_EPS);
        assert!(scores.iter().all(|&s| s == 0.5));
    }

    #[test]
    fn matches_normal_equations_on_random_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for trial in 0..100 {
            let j = 1 + (trial % 6);
            let n = 10 + (trial * 37) % 4991;
            let input = random_input(&mut rng, n, j);
            let lambda = if trial % 4 == 0 { 1.0 } else { 0.1 + rng.random::<f64>() };
            let fit = ridge_fit(&input, lambda);
            let oracle = normal_equations_oracle(&input, lambda);
            for (a, (x, y)) in fit.beta.iter().zip(&oracle).enumerate() {
                assert!(
                    (x - y).abs() < 1e-8,
                    "trial {trial} beta[{a}]: {x} vs oracle {y}"
                );
            }
        }
    }

    #[test]
    fn single_column_without_penalty_is_ols() {
        let xs = [0.1, 0.4, 0.8, 0.2, 0.9];
        let ys = [0.0, 1.0, 1.0, 0.0, 1.0];
        let input = StackInput {
            rows: xs.to_vec(),
            targets: ys.to_vec(),
            n_models: 1,
        };
        let fit = ridge_fit(&input, 0.0);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        assert_relative_eq!(fit.beta[0], sxy / sxx, epsilon = 1e-12);
    }

    #[test]
    fn orthonormal_columns_shrink_by_half_at_unit_lambda() {
        // identity design: X'X = I, beta = X'y / (1 + lambda)
        let input = StackInput {
            rows: vec![1.0, 0.0, 0.0, 1.0],
            targets: vec![1.0, 0.5],
            n_models: 2,
        };
        let fit = ridge_fit(&input, 1.0);
        assert_relative_eq!(fit.beta[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(fit.beta[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn duplicated_columns_share_weight() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let n = 200;
        let col: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let targets: Vec<f64> = col.iter().map(|&x| f64::from(x > 0.5)).collect();
        let mut rows = Vec::with_capacity(n * 2);
        for &x in &col {
            rows.push(x);
            rows.push(x);
        }
        let input = StackInput {
            rows,
            targets,
            n_models: 2,
        };
        let fit = ridge_fit(&input, 1.0);
        assert_relative_eq!(fit.beta[0], fit.beta[1], epsilon = 1e-10);
    }

    #[test]
    fn norm_never_grows_with_lambda() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let input = random_input(&mut rng, 300, 4);
        let mut last = f64::INFINITY;
        for &lambda in &[0.0, 0.5, 1.0, 2.0, 10.0, 100.0] {
            let fit = ridge_fit(&input, lambda);
            let norm: f64 = fit.beta.iter().map(|b| b * b).sum::<f64>().sqrt();
            assert!(norm <= last + 1e-12, "norm {norm} grew at lambda {lambda}");
            last = norm;
        }
    }

    #[test]
    fn predict_is_clipped_linear_score() {
        let coeffs = RidgeCoefficients {
            beta: vec![0.0, 0.0],
            lambda: 1.0,
        };
        assert_eq!(ensemble_predict(&coeffs, &[0.7, 0.3]), 0.0);

        let one_hot = RidgeCoefficients {
            beta: vec![0.0, 1.0],
            lambda: 1.0,
        };
        assert_eq!(ensemble_predict(&one_hot, &[0.7, 0.3]), 0.3);

        // hand arithmetic: 0.8*0.5 + (-0.2)*0.25 = 0.35
        let coeffs = RidgeCoefficients {
            beta: vec![0.8, -0.2],
            lambda: 1.0,
        };
        assert_relative_eq!(ensemble_predict(&coeffs, &[0.5, 0.25]), 0.35, epsilon = 1e-15);

        // clipping
        let big = RidgeCoefficients {
            beta: vec![3.0],
            lambda: 1.0,
        };
        assert_eq!(ensemble_predict(&big, &[1.0]), 1.0);
        let neg = RidgeCoefficients {
            beta: vec![-3.0],
            lambda: 1.0,
        };
        assert_eq!(ensemble_predict(&neg, &[1.0]), 0.0);
    }

    #[test]
    fn online_stacker_respects_warmup_and_learns() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let mut stack = OnlineStacker::new(2, DEFAULT_LAMBDA, 50, None);
        // model 0 is informative, model 1 is noise
        let mut informative_hits = 0usize;
        let mut total = 0usize;
        for step in 0..400 {
            let outcome = rng.random::<f64>() < 0.3;
            let p0 = if outcome {
                0.6 + 0.3 * rng.random::<f64>()
            } else {
                0.1 + 0.3 * rng.random::<f64>()
            };
            let p1 = rng.random::<f64>();
            if let Some((p, coeffs)) = stack.predict(&[p0, p1]) {
                assert!((0.0..=1.0).contains(&p));
                assert_eq!(coeffs.beta.len(), 2);
                if step > 200 {
                    total += 1;
                    if (p > 0.3) == outcome {
                        informative_hits += 1;
                    }
                }
            } else {
                assert!(stack.observations() < 50);
            }
            stack.record(&[p0, p1], outcome).unwrap();
        }
        // the stack should track the informative model well above chance
        assert!(
            informative_hits as f64 / total as f64 > 0.7,
            "hit rate {}",
            informative_hits as f64 / total as f64
        );
    }
}
