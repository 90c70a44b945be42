//! Local parametric approach: selecting the longest trailing interval on
//! which a GARCH(1,1) fit is not contradicted by a change point.
//!
//! Candidate intervals all end at the current index and grow through a
//! ladder of lengths. Each candidate is scanned for a breakpoint with a
//! likelihood-ratio statistic evaluated in its local-quadratic (score)
//! form: for a split A|B of the fitted window,
//!
//! ```text
//! T(tau) = 1/2 S_A' H_A^-1 S_A + 1/2 S_B' H_B^-1 S_B - 1/2 S' H^-1 S
//! ```
//!
//! with per-observation quasi-likelihood scores `s_i` at the pooled fit,
//! segment score sums `S_X` and outer-product information `H_X`. Critical
//! values come from a multiplier bootstrap: `B` weight sequences
//! `w ~ N(1,1)` re-weight the scores (recentred by the segment's share of
//! the total), and the acceptance threshold is a high quantile of the
//! bootstrap maximum over every candidate and breakpoint scanned so far,
//! which controls the family-wise rejection rate across the whole ladder.
//! The weight stream is derived from `(seed, end_index)`, so a selection is
//! bit-reproducible and independent of any other interval's stream.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::econ::garch::{ArmaGarchOrders, ArmaGarchParams, QuasiLikelihood};
use crate::error::{Error, Result};
use crate::optim::Options;
use crate::timeseries::ReturnSeries;

/// The interval the scan settled on, with its GARCH(1,1) fit.
#[derive(Debug, Clone)]
pub struct HomogeneityInterval {
    /// Index of the first observation inside the interval.
    pub start: usize,
    /// Index of the last observation (the current time), inclusive.
    pub end: usize,
    pub params: ArmaGarchParams,
}

/// Scan configuration. `candidates` are interval lengths in ascending
/// order; the shortest is always accepted as the baseline.
#[derive(Debug, Clone)]
pub struct LpaConfig {
    pub candidates: Vec<usize>,
    /// Breakpoint grid spacing inside each candidate.
    pub step: usize,
    /// Cap on the number of breakpoints per candidate; long windows thin
    /// their grid to stay within it.
    pub max_breakpoints: usize,
    /// Minimum observations on each side of a breakpoint.
    pub margin: usize,
    pub bootstrap_reps: usize,
    /// Quantile of the bootstrap maximum used as critical value.
    pub quantile: f64,
    /// Multiplier weights are constant over blocks of this many
    /// observations, preserving the scores' serial dependence in the
    /// bootstrap sums.
    pub block_len: usize,
    pub seed: u64,
}

impl Default for LpaConfig {
    fn default() -> Self {
        Self {
            candidates: ladder(240, 2880, 5),
            step: 5,
            max_breakpoints: 64,
            margin: 80,
            bootstrap_reps: 100,
            quantile: 0.95,
            block_len: 24,
            seed: 0,
        }
    }
}

/// Ascending interval ladder `{min_len, min_len + step, ..., <= max_len}`.
pub fn ladder(min_len: usize, max_len: usize, step: usize) -> Vec<usize> {
    let mut v = Vec::new();
    let mut l = min_len;
    while l <= max_len {
        v.push(l);
        l += step;
    }
    v
}

const DIM: usize = 3; // omega, alpha, beta of the local GARCH(1,1)

fn quadratic_form(s: &[f64; DIM], h: &[[f64; DIM]; DIM]) -> f64 {
    // ridge-regularized 3x3 solve via the adjugate
    let tr = h[0][0] + h[1][1] + h[2][2];
    let ridge = 1e-12 * tr.max(1.0);
    let a = [
        [h[0][0] + ridge, h[0][1], h[0][2]],
        [h[1][0], h[1][1] + ridge, h[1][2]],
        [h[2][0], h[2][1], h[2][2] + ridge],
    ];
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    if det.abs() < 1e-300 {
        return 0.0;
    }
    let inv_det = 1.0 / det;
    let mut x = [0.0; DIM];
    // x = A^-1 s by Cramer's rule
    for k in 0..DIM {
        let mut m = a;
        for row in m.iter_mut() {
            row[k] = 0.0;
        }
        m[0][k] = s[0];
        m[1][k] = s[1];
        m[2][k] = s[2];
        let dk = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        x[k] = dk * inv_det;
    }
    s[0] * x[0] + s[1] * x[1] + s[2] * x[2]
}

struct CandidateScan {
    length: usize,
    statistic: f64,
    /// Bootstrap statistic per rep.
    boot: Vec<f64>,
    params: ArmaGarchParams,
}

/// Scan one candidate window: fit, score, sup-LR over the breakpoint grid
/// and the matching bootstrap maxima. `weights[b][age]` is indexed by the
/// distance from the window's right end.
fn scan_candidate(
    values: &[f64],
    init: Option<ArmaGarchParams>,
    config: &LpaConfig,
    weights: &[Vec<f64>],
) -> Result<CandidateScan> {
    let orders = ArmaGarchOrders { ar: 0, ma: 0, arch: 1, garch: 1 };
    let fitted = match crate::econ::garch::qmle_fit_values(
        values,
        orders,
        init,
        &Options { max_iters: 200, grad_tol: 1e-5 },
    ) {
        Ok(fit) => fit.params,
        // keep scanning with the best point reached; the statistic only
        // needs scores at a near-optimum
        Err(Error::NoConvergence { best_params, .. }) => {
            ArmaGarchParams::from_natural(orders, &best_params)
        }
        Err(e) => return Err(e),
    };

    let n = values.len();
    let presample = {
        let mean = values.iter().sum::<f64>() / n as f64;
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)
    };
    let lik = QuasiLikelihood { values, orders, presample };
    let (_, scores) = lik.per_obs(&fitted.to_natural());

    // prefix sums of scores and their outer products
    let mut ps = vec![[0.0f64; DIM]; n + 1];
    let mut ph = vec![[[0.0f64; DIM]; DIM]; n + 1];
    for i in 0..n {
        let s = &scores[i];
        for a in 0..DIM {
            ps[i + 1][a] = ps[i][a] + s[a];
            for b in 0..DIM {
                ph[i + 1][a][b] = ph[i][a][b] + s[a] * s[b];
            }
        }
    }
    let s_total = ps[n];
    let h_total = ph[n];
    let base = 0.5 * quadratic_form(&s_total, &h_total);

    // breakpoint grid
    let step = config.step.max((n / config.max_breakpoints.max(1)).max(1));
    let mut grid = Vec::new();
    let mut tau = config.margin.max(step);
    while tau + config.margin <= n {
        grid.push(tau);
        tau += step;
    }

    let reps = weights.len();
    let mut boot = vec![0.0f64; reps];
    let mut statistic = 0.0f64;

    if !grid.is_empty() {
        // per-rep weighted prefix score sums at grid resolution
        // weights are age-indexed: observation i has age n - 1 - i
        let mut wps = vec![vec![[0.0f64; DIM]; grid.len() + 1]; reps];
        for b in 0..reps {
            let w = &weights[b];
            let mut acc = [0.0f64; DIM];
            let mut gi = 0usize;
            for i in 0..n {
                if gi < grid.len() && i == grid[gi] {
                    wps[b][gi + 1] = acc;
                    gi += 1;
                }
                let c = w[n - 1 - i] - 1.0;
                let s = &scores[i];
                for a in 0..DIM {
                    acc[a] += c * s[a];
                }
            }
            wps[b][0] = acc; // total weighted sum stored at slot 0
        }

        for (gi, &tau) in grid.iter().enumerate() {
            let mut s_a = [0.0; DIM];
            let mut s_b = [0.0; DIM];
            let mut h_a = [[0.0; DIM]; DIM];
            let mut h_b = [[0.0; DIM]; DIM];
            for a in 0..DIM {
                s_a[a] = ps[tau][a];
                s_b[a] = s_total[a] - s_a[a];
                for c in 0..DIM {
                    h_a[a][c] = ph[tau][a][c];
                    h_b[a][c] = h_total[a][c] - h_a[a][c];
                }
            }
            let t = 0.5 * quadratic_form(&s_a, &h_a) + 0.5 * quadratic_form(&s_b, &h_b) - base;
            if t > statistic {
                statistic = t;
            }

            for b in 0..reps {
                let total_w = wps[b][0];
                let sa_w = wps[b][gi + 1];
                let mut sa = [0.0; DIM];
                let mut sb = [0.0; DIM];
                for a in 0..DIM {
                    // within-segment sums keep each vector inside the span
                    // of its own segment's scores
                    sa[a] = sa_w[a];
                    sb[a] = total_w[a] - sa_w[a];
                }
                let tb = 0.5 * quadratic_form(&sa, &h_a) + 0.5 * quadratic_form(&sb, &h_b);
                if tb > boot[b] {
                    boot[b] = tb;
                }
            }
        }
    }

    Ok(CandidateScan {
        length: n,
        statistic,
        boot,
        params: fitted,
    })
}

/// Find the largest trailing interval of homogeneity ending at index `t`.
///
/// Candidates are scanned shortest to longest; the selected interval is the
/// longest prefix of the ladder whose statistics all stay below the
/// bootstrap critical value. The shortest candidate is accepted
/// unconditionally.
pub fn lpa_select_interval(
    returns: &ReturnSeries,
    t: usize,
    config: &LpaConfig,
) -> Result<HomogeneityInterval> {
    let values = returns.values();
    if t >= values.len() {
        return Err(Error::NotEnoughData {
            what: "LPA end index",
            need: t + 1,
            have: values.len(),
        });
    }
    let available = t + 1;
    let candidates: Vec<usize> = config
        .candidates
        .iter()
        .copied()
        .filter(|&l| l <= available)
        .collect();
    let shortest = *config.candidates.first().ok_or_else(|| {
        Error::InvalidParams("LPA candidate ladder is empty".into())
    })?;
    if candidates.is_empty() {
        return Err(Error::NotEnoughData {
            what: "LPA shortest candidate",
            need: shortest,
            have: available,
        });
    }

    // age-indexed multiplier weights, one stream per (seed, end index)
    let max_len = *candidates.last().unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed ^ (t as u64).wrapping_mul(0x9E3779B97F4A7C15));
    let normal = Normal::new(1.0, 1.0).expect("multiplier weights");
    let block = config.block_len.max(1);
    let n_blocks = max_len / block + 1;
    let weights: Vec<Vec<f64>> = (0..config.bootstrap_reps)
        .map(|_| {
            let draws: Vec<f64> = (0..n_blocks).map(|_| normal.sample(&mut rng)).collect();
            (0..max_len).map(|age| draws[age / block]).collect()
        })
        .collect();

    // Sequential scan with early stop. Candidate k is tested against the
    // bootstrap maximum accumulated over the candidates accepted before it,
    // never against its own resampled scores: once a break enters the
    // window the scores are contaminated and would inflate the critical
    // value exactly when power is needed. The accumulated maximum keeps the
    // family-wise rejection rate across the ladder near the nominal level.
    let reps = config.bootstrap_reps;
    let rank = ((config.quantile * reps as f64).ceil() as usize).clamp(1, reps);
    let mut max_boot = vec![0.0f64; reps];
    let mut accepted: Option<CandidateScan> = None;
    let mut init: Option<ArmaGarchParams> = None;

    for (k, &len) in candidates.iter().enumerate() {
        let window = &values[t + 1 - len..=t];
        let scan = scan_candidate(window, init.clone(), config, &weights)?;
        init = Some(scan.params.clone());

        if k > 0 {
            let mut sorted = max_boot.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let critical = sorted[rank - 1];
            if scan.statistic > critical {
                break;
            }
        }
        for (m, &b) in max_boot.iter_mut().zip(&scan.boot) {
            if b > *m {
                *m = b;
            }
        }
        accepted = Some(scan);
    }

    let scan = accepted.expect("shortest candidate is always accepted");
    Ok(HomogeneityInterval {
        start: t + 1 - scan.length,
        end: t,
        params: scan.params,
    })
}
