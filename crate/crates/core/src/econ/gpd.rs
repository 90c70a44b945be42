//! Generalized Pareto tail fitting (peaks over threshold) and the
//! exceedance-probability maps used by the normal and EVT classifiers.
//!
//! The distribution function of the excess `x >= 0` over the threshold:
//!
//! ```text
//! G(x) = 1 - (1 + xi * x / beta)^(-1/xi)   xi != 0
//! G(x) = 1 - exp(-x / beta)                xi  = 0
//! ```
//!
//! The tail is composed with the standard POT estimator
//! `P(Z > z) = tail_fraction * (1 - G(z - g))` for standardized residuals
//! `z` at or above the threshold `g`; below `g` the normal distribution
//! takes over.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::econ::garch::VolForecast;
use crate::error::{Error, Result};
use crate::optim::{minimize, Options};

/// Fraction of residuals treated as the upper tail.
pub const TAIL_FRACTION: f64 = 0.05;

/// Minimum number of exceedances required for a stable tail fit.
pub const MIN_EXCEEDANCES: usize = 50;

/// Fitted tail: shape, scale, the residual threshold `g` and the tail mass
/// assigned to the region above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdParams {
    pub xi: f64,
    pub beta: f64,
    pub threshold_g: f64,
    pub tail_fraction: f64,
}

/// GPD distribution function of the excess `x` over the threshold.
/// Out-of-support values clamp: `x <= 0` gives 0, beyond the bounded
/// support (`xi < 0`) gives 1.
pub fn gpd_cdf(params: &GpdParams, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let (xi, beta) = (params.xi, params.beta);
    if xi.abs() < 1e-12 {
        return 1.0 - (-x / beta).exp();
    }
    let t = xi * x / beta;
    if t <= -1.0 {
        // beyond the upper endpoint -beta/xi when xi < 0
        return 1.0;
    }
    1.0 - (-(t.ln_1p()) / xi).exp()
}

/// Inverse of [`gpd_cdf`]: the excess exceeded with probability `1 - p`.
pub fn gpd_excess_quantile(params: &GpdParams, p: f64) -> f64 {
    let (xi, beta) = (params.xi, params.beta);
    let tail = 1.0 - p;
    if xi.abs() < 1e-12 {
        -beta * tail.ln()
    } else {
        beta / xi * (tail.powf(-xi) - 1.0)
    }
}

/// Fit (xi, beta) by maximum likelihood on strictly positive exceedances.
pub fn fit_exceedances(excesses: &[f64]) -> Result<(f64, f64)> {
    if excesses.len() < MIN_EXCEEDANCES {
        return Err(Error::NotEnoughData {
            what: "GPD exceedances",
            need: MIN_EXCEEDANCES,
            have: excesses.len(),
        });
    }
    if excesses.iter().any(|&y| y <= 0.0 || !y.is_finite()) {
        return Err(Error::InvalidParams("exceedances must be positive and finite".into()));
    }
    let n = excesses.len() as f64;
    let mean = excesses.iter().sum::<f64>() / n;
    let var = excesses.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1.0);

    // method-of-moments start, clipped into the optimizer's comfort zone
    let xi0 = (0.5 * (1.0 - mean * mean / var)).clamp(-0.3, 0.6);
    let beta0 = (0.5 * mean * (mean * mean / var + 1.0)).max(1e-6);

    // Mean NLL over (b = ln beta, xi): b + avg (1 + 1/xi) ln(1 + xi y/beta),
    // with the exponential limit and its xi-gradient avg(u - u^2/2) at xi=0.
    let objective = |p: &[f64], g: &mut [f64]| {
        let (b, xi) = (p[0], p[1]);
        let beta = b.exp();
        let mut nll = n * b;
        let mut gb = n;
        let mut gxi = 0.0;
        for &y in excesses {
            let u = y / beta;
            if xi.abs() < 1e-8 {
                nll += u;
                gb -= u;
                gxi += u - u * u / 2.0;
            } else {
                let t = 1.0 + xi * u;
                if t <= 0.0 {
                    g[0] = 0.0;
                    g[1] = 0.0;
                    return f64::INFINITY;
                }
                let log_t = (xi * u).ln_1p();
                nll += (1.0 + 1.0 / xi) * log_t;
                gb -= (1.0 + xi) * u / t;
                gxi += -log_t / (xi * xi) + (1.0 + 1.0 / xi) * u / t;
            }
        }
        g[0] = gb / n;
        g[1] = gxi / n;
        nll / n
    };

    let m = minimize(objective, &[beta0.ln(), xi0], &Options::default());
    if !m.converged {
        return Err(Error::NoConvergence {
            iters: m.iters,
            best_objective: m.value,
            best_params: vec![m.x[1], m.x[0].exp()],
        });
    }
    Ok((m.x[1], m.x[0].exp()))
}

/// Peaks-over-threshold fit on standardized residuals: the threshold is the
/// empirical upper-`TAIL_FRACTION` quantile and (xi, beta) are fitted on
/// the strict exceedances over it.
pub fn gpd_fit(residuals: &[f64]) -> Result<GpdParams> {
    if residuals.is_empty() {
        return Err(Error::NotEnoughData {
            what: "residuals",
            need: MIN_EXCEEDANCES * 20,
            have: 0,
        });
    }
    let mut sorted = residuals.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let rank = (((1.0 - TAIL_FRACTION) * n as f64).ceil() as usize).clamp(1, n);
    let g = sorted[rank - 1];
    let excesses: Vec<f64> = sorted[rank..].iter().map(|z| z - g).filter(|&y| y > 0.0).collect();
    let (xi, beta) = fit_exceedances(&excesses)?;
    Ok(GpdParams {
        xi,
        beta,
        threshold_g: g,
        tail_fraction: TAIL_FRACTION,
    })
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// `P(loss > tvar)` under a normal one-step forecast of the loss.
pub fn exceedance_prob_normal(forecast: &VolForecast, tvar: f64) -> f64 {
    let z = (tvar - forecast.mu_hat) / forecast.sigma_hat;
    1.0 - standard_normal().cdf(z)
}

/// `P(loss > tvar)` with a GPD tail: POT composition at or above the
/// residual threshold `g`, normal body below it.
pub fn exceedance_prob_evt(forecast: &VolForecast, gpd: &GpdParams, tvar: f64) -> f64 {
    let z = (tvar - forecast.mu_hat) / forecast.sigma_hat;
    if z >= gpd.threshold_g {
        gpd.tail_fraction * (1.0 - gpd_cdf(gpd, z - gpd.threshold_g))
    } else {
        1.0 - standard_normal().cdf(z)
    }
}

/// alpha-level loss quantile under the normal forecast:
/// `mu + sigma * z_{1-alpha}`.
pub fn loss_quantile_normal(forecast: &VolForecast, alpha: f64) -> f64 {
    let z = standard_normal().inverse_cdf(1.0 - alpha);
    forecast.mu_hat + forecast.sigma_hat * z
}

/// alpha-level loss quantile with the GPD tail. Falls back to the normal
/// quantile when `alpha` is not inside the fitted tail mass.
pub fn loss_quantile_evt(forecast: &VolForecast, gpd: &GpdParams, alpha: f64) -> f64 {
    if alpha < gpd.tail_fraction {
        // solve tail_fraction * (1 - G(q - g)) = alpha
        let q = gpd.threshold_g + gpd_excess_quantile(gpd, 1.0 - alpha / gpd.tail_fraction);
        forecast.mu_hat + forecast.sigma_hat * q
    } else {
        loss_quantile_normal(forecast, alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::central_diff_grad;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn params(xi: f64, beta: f64) -> GpdParams {
        GpdParams {
            xi,
            beta,
            threshold_g: 0.0,
            tail_fraction: TAIL_FRACTION,
        }
    }

    #[test]
    fn cdf_direct_substitutions() {
        assert_eq!(gpd_cdf(&params(0.3, 1.0), 0.0), 0.0);
        assert_relative_eq!(
            gpd_cdf(&params(0.0, 1.0), 1.0),
            1.0 - (-1.0f64).exp(),
            epsilon = 1e-15
        );
        assert_relative_eq!(gpd_cdf(&params(1.0, 1.0), 1.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn cdf_clamps_outside_bounded_support() {
        // xi = -0.5, beta = 1: support ends at 2
        let p = params(-0.5, 1.0);
        assert_eq!(gpd_cdf(&p, 3.0), 1.0);
        assert!(gpd_cdf(&p, 1.999) < 1.0);
    }

    #[test]
    fn cdf_monotone_and_continuous_in_xi() {
        for &xi in &[-0.3, 0.0, 0.5, 1.5] {
            let p = params(xi, 0.8);
            let mut last = 0.0;
            for i in 0..200 {
                let x = i as f64 * 0.02;
                let v = gpd_cdf(&p, x);
                assert!(v >= last - 1e-15, "xi={xi} x={x}");
                assert!((0.0..=1.0).contains(&v));
                last = v;
            }
        }
        // continuity at xi -> 0
        for &x in &[0.1, 0.5, 1.0, 3.0] {
            let g0 = gpd_cdf(&params(0.0, 1.0), x);
            for &xi in &[1e-6, -1e-6] {
                let g = gpd_cdf(&params(xi, 1.0), x);
                assert!((g - g0).abs() < 1e-5, "xi={xi} x={x}: {g} vs {g0}");
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let p = params(0.3, 1.2);
        for &prob in &[0.1, 0.5, 0.9, 0.99] {
            let q = gpd_excess_quantile(&p, prob);
            assert_relative_eq!(gpd_cdf(&p, q), prob, epsilon = 1e-10);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let excesses: Vec<f64> = (0..500)
            .map(|_| {
                let u: f64 = rng.random();
                // GPD(0.2, 1) via inverse cdf
                (1.0 / 0.2) * ((1.0 - u).powf(-0.2) - 1.0)
            })
            .collect();
        let n = excesses.len() as f64;
        let objective = |p: &[f64], g: &mut [f64]| {
            let (b, xi) = (p[0], p[1]);
            let beta = b.exp();
            let mut nll = n * b;
            let mut gb = n;
            let mut gxi = 0.0;
            for &y in &excesses {
                let u = y / beta;
                let t = 1.0 + xi * u;
                let log_t = (xi * u).ln_1p();
                nll += (1.0 + 1.0 / xi) * log_t;
                gb -= (1.0 + xi) * u / t;
                gxi += -log_t / (xi * xi) + (1.0 + 1.0 / xi) * u / t;
            }
            g[0] = gb;
            g[1] = gxi;
            nll
        };
        for &(b, xi) in &[(0.0, 0.3), (0.5, 0.15), (-0.3, 0.6)] {
            let mut g = vec![0.0; 2];
            objective(&[b, xi], &mut g);
            let fd = central_diff_grad(
                |p| {
                    let mut tmp = vec![0.0; 2];
                    objective(p, &mut tmp)
                },
                &[b, xi],
                1e-6,
            );
            for i in 0..2 {
                let rel = (g[i] - fd[i]).abs() / g[i].abs().max(fd[i].abs()).max(1e-8);
                assert!(rel < 1e-6, "param {i}: {} vs {}", g[i], fd[i]);
            }
        }
    }

    #[test]
    fn exponential_excesses_fit_as_xi_zero() {
        // memorylessness: exceedances of Exp(1) over any threshold are Exp(1)
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let excesses: Vec<f64> = (0..5000).map(|_| -rng.random::<f64>().ln()).collect();
        let (xi, beta) = fit_exceedances(&excesses).unwrap();
        // 3 sigma MLE bands at n = 5000
        let n = 5000f64;
        assert!(xi.abs() < 3.0 * (1.0 + xi) / n.sqrt() + 0.02, "xi={xi}");
        assert!((beta - 1.0).abs() < 3.0 * beta * (2.0 / n).sqrt() + 0.02, "beta={beta}");
    }

    #[test]
    fn heavy_tail_recovery() {
        let (true_xi, true_beta) = (0.3, 1.0);
        for seed in [1u64, 2, 3] {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let excesses: Vec<f64> = (0..5000)
                .map(|_| {
                    let u: f64 = rng.random();
                    true_beta / true_xi * ((1.0 - u).powf(-true_xi) - 1.0)
                })
                .collect();
            let (xi, beta) = fit_exceedances(&excesses).unwrap();
            assert!((xi - true_xi).abs() <= 0.1, "xi {xi}");
            assert!((beta - true_beta).abs() <= 0.1, "beta {beta}");
        }
    }

    #[test]
    fn too_few_residuals_error_carries_count() {
        let residuals: Vec<f64> = (0..10).map(|i| i as f64).collect();
        match gpd_fit(&residuals) {
            Err(Error::NotEnoughData { have, .. }) => assert!(have < MIN_EXCEEDANCES),
            other => panic!("expected NotEnoughData, got {other:?}"),
        }
    }

    #[test]
    fn fit_on_residual_vector_selects_threshold() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let residuals: Vec<f64> = (0..40_000).map(|_| -rng.random::<f64>().ln()).collect();
        let fit = gpd_fit(&residuals).unwrap();
        // Exp(1): 95th percentile = ln 20 ~= 3.0
        assert!((fit.threshold_g - 20.0f64.ln()).abs() < 0.15, "g={}", fit.threshold_g);
        assert!(fit.xi.abs() < 0.12);
        assert!((fit.beta - 1.0).abs() < 0.12);
    }

    #[test]
    fn normal_probability_map() {
        let f = VolForecast { mu_hat: 0.01, sigma_hat: 0.02 };
        assert_relative_eq!(exceedance_prob_normal(&f, 0.01), 0.5, epsilon = 1e-12);
        let p = exceedance_prob_normal(&f, 0.01 + 1.6449 * 0.02);
        assert!((p - 0.05).abs() < 1e-4, "p={p}");
        assert!(exceedance_prob_normal(&f, 1e9) < 1e-12);
    }

    #[test]
    fn evt_probability_branches() {
        let f = VolForecast { mu_hat: 0.0, sigma_hat: 1.0 };
        let gpd = GpdParams {
            xi: 0.2,
            beta: 0.7,
            threshold_g: 1.8,
            tail_fraction: 0.05,
        };
        // below g: identical to the normal map
        let below = 1.2;
        assert_relative_eq!(
            exceedance_prob_evt(&f, &gpd, below),
            exceedance_prob_normal(&f, below),
            epsilon = 1e-15
        );
        // at g: exactly the tail fraction
        assert_relative_eq!(exceedance_prob_evt(&f, &gpd, 1.8), 0.05, epsilon = 1e-15);
        // monotone nonincreasing within the tail, limit 0
        let mut last = 0.05;
        for i in 0..100 {
            let tvar = 1.8 + i as f64 * 0.2;
            let p = exceedance_prob_evt(&f, &gpd, tvar);
            assert!(p <= last + 1e-15);
            last = p;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn loss_quantiles_invert_probability_maps() {
        let f = VolForecast { mu_hat: 0.002, sigma_hat: 0.015 };
        let q = loss_quantile_normal(&f, 0.05);
        assert_relative_eq!(exceedance_prob_normal(&f, q), 0.05, epsilon = 1e-9);

        let gpd = GpdParams {
            xi: 0.25,
            beta: 0.8,
            threshold_g: 1.6,
            tail_fraction: 0.05,
        };
        let q = loss_quantile_evt(&f, &gpd, 0.01);
        assert_relative_eq!(exceedance_prob_evt(&f, &gpd, q), 0.01, epsilon = 1e-9);
        // alpha at/above the tail mass falls back to the normal quantile
        let q = loss_quantile_evt(&f, &gpd, 0.2);
        assert_relative_eq!(q, loss_quantile_normal(&f, 0.2), epsilon = 1e-12);
    }
}
