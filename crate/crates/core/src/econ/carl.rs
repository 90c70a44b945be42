//! CARL-vol: a conditional autoregressive logit that models the exceedance
//! probability directly from GARCH(1,1) volatility.
//!
//! For a constant threshold `Q`:
//!
//! ```text
//! p_t    = 0.5 / (1 + exp(-x_t)) + 0.5 * 1(Q > 0)
//! x_t    = phi0 + phi1 * sigma_t
//! sig2_t = omega + beta1 * sig2_{t-1} + alpha1 * (r_{t-1} - mu)^2
//! ```
//!
//! Calibrated by maximum likelihood with a Bernoulli density over the hit
//! indicators `1(value_t >= Q)`. Probabilities are clamped away from {0, 1}
//! by `P_CLAMP` to keep the likelihood finite.

use serde::{Deserialize, Serialize};

use crate::econ::garch::{sigmoid, softplus, softplus_inv};
use crate::error::{Error, Result};
use crate::optim::{minimize, Options};
use crate::timeseries::ReturnSeries;

/// Probability clamp for the Bernoulli likelihood.
pub const P_CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlVolParams {
    pub phi0: f64,
    pub phi1: f64,
    pub omega: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub mu: f64,
}

impl CarlVolParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || self.alpha1 < 0.0 || self.beta1 < 0.0 {
            return Err(Error::InvalidParams(
                "CARL-vol variance parameters must satisfy omega > 0, alpha1, beta1 >= 0".into(),
            ));
        }
        if self.alpha1 + self.beta1 >= 1.0 {
            return Err(Error::InvalidParams(
                "CARL-vol persistence alpha1 + beta1 must be < 1".into(),
            ));
        }
        Ok(())
    }
}

/// The exceedance probability for volatility `sigma_t`, exactly as modeled.
pub fn carlvol_prob(params: &CarlVolParams, sigma_t: f64, q: f64) -> f64 {
    let x = params.phi0 + params.phi1 * sigma_t;
    0.5 * sigmoid(x) + if q > 0.0 { 0.5 } else { 0.0 }
}

/// Volatility path of the GARCH(1,1) recursion, seeded with the sample
/// variance, plus the one-step-ahead value at the end.
pub fn volatility_path(params: &CarlVolParams, values: &[f64]) -> (Vec<f64>, f64) {
    let n = values.len();
    let presample = sample_variance(values);
    let mut sig2 = vec![0.0; n];
    for t in 0..n {
        let (lag_s2, lag_e2) = if t == 0 {
            (presample, presample)
        } else {
            let d = values[t - 1] - params.mu;
            (sig2[t - 1], d * d)
        };
        sig2[t] = params.omega + params.beta1 * lag_s2 + params.alpha1 * lag_e2;
    }
    let d = values[n - 1] - params.mu;
    let next = params.omega + params.beta1 * sig2[n - 1] + params.alpha1 * d * d;
    (sig2.iter().map(|s| s.sqrt()).collect(), next.sqrt())
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0)
}

/// Bernoulli negative log-likelihood of the hit series `1(value >= Q)`.
pub fn carlvol_nll(params: &CarlVolParams, returns: &ReturnSeries, q: f64) -> Result<f64> {
    params.validate()?;
    let hits: Vec<bool> = returns.values().iter().map(|&v| v >= q).collect();
    let natural = [
        params.phi0,
        params.phi1,
        params.mu,
        params.omega,
        params.alpha1,
        params.beta1,
    ];
    let (nll, _) = nll_grad_natural(returns.values(), &hits, q, &natural);
    Ok(nll)
}

/// NLL (sum) and gradient w.r.t. the natural layout
/// `[phi0, phi1, mu, omega, alpha1, beta1]`.
fn nll_grad_natural(values: &[f64], hits: &[bool], q: f64, natural: &[f64]) -> (f64, [f64; 6]) {
    let (phi0, phi1, mu, omega, alpha1, beta1) = (
        natural[0], natural[1], natural[2], natural[3], natural[4], natural[5],
    );
    let n = values.len();
    let presample = sample_variance(values);
    let shift = if q > 0.0 { 0.5 } else { 0.0 };

    let mut nll = 0.0;
    let mut grad = [0.0f64; 6];
    // d sig2 / d (mu, omega, alpha1, beta1)
    let mut dsig2 = [0.0f64; 4];
    let mut sig2_prev = 0.0;

    for t in 0..n {
        let (lag_s2, lag_e2, dlag_e2_dmu) = if t == 0 {
            (presample, presample, 0.0)
        } else {
            let d = values[t - 1] - mu;
            (sig2_prev, d * d, -2.0 * d)
        };
        // sensitivities first (they use the previous dsig2)
        let new_dsig2 = [
            alpha1 * dlag_e2_dmu + beta1 * if t == 0 { 0.0 } else { dsig2[0] }, // mu
            1.0 + beta1 * if t == 0 { 0.0 } else { dsig2[1] },                  // omega
            lag_e2 + beta1 * if t == 0 { 0.0 } else { dsig2[2] },               // alpha1
            lag_s2 + beta1 * if t == 0 { 0.0 } else { dsig2[3] },               // beta1
        ];
        let sig2 = omega + beta1 * lag_s2 + alpha1 * lag_e2;
        dsig2 = new_dsig2;
        sig2_prev = sig2;

        let sigma = sig2.sqrt();
        let x = phi0 + phi1 * sigma;
        let s = sigmoid(x);
        let p_raw = 0.5 * s + shift;
        let p = p_raw.clamp(P_CLAMP, 1.0 - P_CLAMP);
        let h = if hits[t] { 1.0 } else { 0.0 };
        nll -= h * p.ln() + (1.0 - h) * (1.0 - p).ln();

        // gradient flows only when the clamp is inactive
        if p_raw > P_CLAMP && p_raw < 1.0 - P_CLAMP {
            let dnll_dp = (p - h) / (p * (1.0 - p));
            let dp_dx = 0.5 * s * (1.0 - s);
            let dnll_dx = dnll_dp * dp_dx;
            grad[0] += dnll_dx;
            grad[1] += dnll_dx * sigma;
            let dsigma = 1.0 / (2.0 * sigma);
            let dx_dvar = phi1 * dsigma;
            grad[2] += dnll_dx * dx_dvar * dsig2[0];
            grad[3] += dnll_dx * dx_dvar * dsig2[1];
            grad[4] += dnll_dx * dx_dvar * dsig2[2];
            grad[5] += dnll_dx * dx_dvar * dsig2[3];
        }
    }
    (nll, grad)
}

/// Fit by maximum likelihood. Errors on a degenerate hit pattern (all hits
/// or none). Variance parameters are constrained positive and stationary
/// through the same reparameterization as the GARCH QMLE.
pub fn carlvol_fit(
    returns: &ReturnSeries,
    q: f64,
    init: Option<CarlVolParams>,
) -> Result<CarlVolParams> {
    let hits: Vec<bool> = returns.values().iter().map(|&v| v >= q).collect();
    carlvol_fit_hits(returns.values(), &hits, q, init)
}

pub(crate) fn carlvol_fit_hits(
    values: &[f64],
    hits: &[bool],
    q: f64,
    init: Option<CarlVolParams>,
) -> Result<CarlVolParams> {
    let n_hits = hits.iter().filter(|&&h| h).count();
    if n_hits == 0 || n_hits == hits.len() {
        return Err(Error::Degenerate(format!(
            "hit pattern is constant ({n_hits} of {} hits)",
            hits.len()
        )));
    }
    if values.len() < 60 {
        return Err(Error::NotEnoughData {
            what: "CARL-vol window",
            need: 60,
            have: values.len(),
        });
    }
    let variance = sample_variance(values);
    if !(variance > 1e-300) {
        return Err(Error::Degenerate("constant series".into()));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let init = init.unwrap_or(CarlVolParams {
        phi0: 0.0,
        phi1: 0.0,
        omega: 0.2 * variance,
        alpha1: 0.1,
        beta1: 0.7,
        mu: mean,
    });
    init.validate()?;

    // unconstrained layout: [phi0, phi1, mu, ln omega, v, c_alpha, c_beta]
    let to_natural = |u: &[f64]| -> [f64; 6] {
        let s = sigmoid(u[4]);
        let ga = softplus(u[5]);
        let gb = softplus(u[6]);
        let total = ga + gb;
        [u[0], u[1], u[2], u[3].exp(), s * ga / total, s * gb / total]
    };
    let persistence = (init.alpha1 + init.beta1).clamp(1e-8, 1.0 - 1e-8);
    let u0 = [
        init.phi0,
        init.phi1,
        init.mu,
        init.omega.ln(),
        (persistence / (1.0 - persistence)).ln(),
        softplus_inv((init.alpha1 / persistence).max(1e-8)),
        softplus_inv((init.beta1 / persistence).max(1e-8)),
    ];

    let scale = 1.0 / values.len() as f64;
    let m = minimize(
        |u, g| {
            let nat = to_natural(u);
            let (nll, gn) = nll_grad_natural(values, hits, q, &nat);
            // chain rule back to the unconstrained coordinates
            g[0] = gn[0] * scale;
            g[1] = gn[1] * scale;
            g[2] = gn[2] * scale;
            g[3] = gn[3] * nat[3] * scale;
            let s = sigmoid(u[4]);
            let ga = softplus(u[5]);
            let gb = softplus(u[6]);
            let total = ga + gb;
            let (sh_a, sh_b) = (ga / total, gb / total);
            g[4] = (gn[4] * sh_a + gn[5] * sh_b) * s * (1.0 - s) * scale;
            let weighted = gn[4] * sh_a + gn[5] * sh_b;
            g[5] = s * sigmoid(u[5]) * (gn[4] - weighted) / total * scale;
            g[6] = s * sigmoid(u[6]) * (gn[5] - weighted) / total * scale;
            nll * scale
        },
        &u0,
        &Options::default(),
    );
    if !m.converged {
        let nat = to_natural(&m.x);
        return Err(Error::NoConvergence {
            iters: m.iters,
            best_objective: m.value,
            best_params: nat.to_vec(),
        });
    }
    let nat = to_natural(&m.x);
    let params = CarlVolParams {
        phi0: nat[0],
        phi1: nat[1],
        mu: nat[2],
        omega: nat[3],
        alpha1: nat[4],
        beta1: nat[5],
    };
    params.validate()?;
    Ok(params)
}

/// One-step-ahead exceedance probability from the end of the series.
pub fn forecast_prob(params: &CarlVolParams, returns: &ReturnSeries, q: f64) -> Result<f64> {
    params.validate()?;
    if returns.is_empty() {
        return Err(Error::NotEnoughData {
            what: "CARL-vol forecast history",
            need: 1,
            have: 0,
        });
    }
    let (_, sigma_next) = volatility_path(params, returns.values());
    Ok(carlvol_prob(params, sigma_next, q))
}
