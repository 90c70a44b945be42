//! ARMA(P,Q)-GARCH(q,p) filtering, quasi-maximum-likelihood estimation and
//! one-step forecasting.
//!
//! The model, for a series `x_t`:
//!
//! ```text
//! x_t     = sum_i a_i x_{t-i} + e_t + sum_j b_j e_{t-j}
//! e_t     = z_t sigma_t,            z_t ~ N(0, 1)
//! sig2_t  = omega + sum_i beta_i sig2_{t-i} + sum_j alpha_j e_{t-j}^2
//! ```
//!
//! with `omega > 0`, `alpha_j, beta_i >= 0` and `sum alpha + sum beta < 1`.
//!
//! Pre-sample convention: lagged values of `x` and `e` before the first
//! observation are zero in the mean recursion, while lagged `sig2` and
//! `e^2` in the variance recursion are both seeded with the pre-sample
//! variance (by default the sample variance of the window).
//!
//! Estimation maximizes the Gaussian quasi-likelihood over an unconstrained
//! reparameterization that satisfies the positivity and stationarity
//! constraints by construction: `omega = exp(u)`, a total persistence
//! budget `s = sigmoid(v) < 1`, and softplus-normalized shares of `s` for
//! the individual ARCH/GARCH coefficients. AR/MA coefficients are passed
//! through unchanged. Gradients are analytic, propagated through both the
//! filter recursions and the reparameterization.

use rand::Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{minimize, Minimum, Options};
use crate::timeseries::ReturnSeries;

const LN_2PI: f64 = 1.8378770664093453;

/// ARMA(P,Q)-GARCH(q,p) parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaGarchParams {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub omega: f64,
    pub arch: Vec<f64>,
    pub garch: Vec<f64>,
}

/// Lag orders (P, Q) for the mean and (q, p) for the variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmaGarchOrders {
    pub ar: usize,
    pub ma: usize,
    pub arch: usize,
    pub garch: usize,
}

impl ArmaGarchOrders {
    pub fn param_count(&self) -> usize {
        self.ar + self.ma + 1 + self.arch + self.garch
    }
}

impl ArmaGarchParams {
    pub fn orders(&self) -> ArmaGarchOrders {
        ArmaGarchOrders {
            ar: self.ar.len(),
            ma: self.ma.len(),
            arch: self.arch.len(),
            garch: self.garch.len(),
        }
    }

    /// Check positivity and covariance stationarity.
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParams(format!("omega must be > 0, got {}", self.omega)));
        }
        if self.arch.iter().chain(&self.garch).any(|&c| c < 0.0 || !c.is_finite()) {
            return Err(Error::InvalidParams("negative ARCH/GARCH coefficient".into()));
        }
        let persistence: f64 = self.arch.iter().chain(&self.garch).sum();
        if persistence >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "sum of ARCH and GARCH coefficients must be < 1, got {persistence}"
            )));
        }
        Ok(())
    }

    /// Flatten to the natural layout `[ar.., ma.., omega, arch.., garch..]`.
    pub fn to_natural(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.orders().param_count());
        v.extend_from_slice(&self.ar);
        v.extend_from_slice(&self.ma);
        v.push(self.omega);
        v.extend_from_slice(&self.arch);
        v.extend_from_slice(&self.garch);
        v
    }

    pub fn from_natural(orders: ArmaGarchOrders, v: &[f64]) -> Self {
        let (p_ar, p_ma, p_arch, p_garch) = (orders.ar, orders.ma, orders.arch, orders.garch);
        assert_eq!(v.len(), orders.param_count());
        Self {
            ar: v[..p_ar].to_vec(),
            ma: v[p_ar..p_ar + p_ma].to_vec(),
            omega: v[p_ar + p_ma],
            arch: v[p_ar + p_ma + 1..p_ar + p_ma + 1 + p_arch].to_vec(),
            garch: v[p_ar + p_ma + 1 + p_arch..p_ar + p_ma + 1 + p_arch + p_garch].to_vec(),
        }
    }

    /// Unconditional variance `omega / (1 - sum alpha - sum beta)`.
    pub fn unconditional_variance(&self) -> f64 {
        let persistence: f64 = self.arch.iter().chain(&self.garch).sum();
        self.omega / (1.0 - persistence)
    }
}

/// Filter output: conditional means, volatilities and innovations, aligned
/// one-to-one with the input series.
#[derive(Debug, Clone)]
pub struct GarchFilter {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub eps: Vec<f64>,
}

impl GarchFilter {
    /// Standardized residuals `eps_t / sigma_t`.
    pub fn standardized_residuals(&self) -> Vec<f64> {
        self.eps.iter().zip(&self.sigma).map(|(e, s)| e / s).collect()
    }
}

/// One-step-ahead conditional mean and volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolForecast {
    pub mu_hat: f64,
    pub sigma_hat: f64,
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Run the exact recursions over `values`. `presample_var` defaults to the
/// sample variance of the input.
pub fn garch_filter(
    params: &ArmaGarchParams,
    returns: &ReturnSeries,
    presample_var: Option<f64>,
) -> Result<GarchFilter> {
    params.validate()?;
    let values = returns.values();
    let presample = presample_var.unwrap_or_else(|| sample_variance(values));
    if !(presample > 0.0 && presample.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "pre-sample variance must be > 0, got {presample}"
        )));
    }
    Ok(filter_values(params, values, presample))
}

pub(crate) fn filter_values(params: &ArmaGarchParams, values: &[f64], presample: f64) -> GarchFilter {
    let n = values.len();
    let mut mu = vec![0.0; n];
    let mut sigma = vec![0.0; n];
    let mut eps = vec![0.0; n];
    let mut sig2 = vec![0.0; n];

    for t in 0..n {
        let mut m = 0.0;
        for (i, &a) in params.ar.iter().enumerate() {
            let k = t as isize - (i as isize + 1);
            if k >= 0 {
                m += a * values[k as usize];
            }
        }
        for (j, &b) in params.ma.iter().enumerate() {
            let k = t as isize - (j as isize + 1);
            if k >= 0 {
                m += b * eps[k as usize];
            }
        }
        mu[t] = m;
        eps[t] = values[t] - m;

        let mut s2 = params.omega;
        for (i, &beta) in params.garch.iter().enumerate() {
            let k = t as isize - (i as isize + 1);
            s2 += beta * if k >= 0 { sig2[k as usize] } else { presample };
        }
        for (j, &alpha) in params.arch.iter().enumerate() {
            let k = t as isize - (j as isize + 1);
            s2 += alpha * if k >= 0 { eps[k as usize] * eps[k as usize] } else { presample };
        }
        sig2[t] = s2;
        sigma[t] = s2.sqrt();
    }
    GarchFilter { mu, sigma, eps }
}

/// One-step-ahead forecast from the end of `history`.
pub fn forecast(
    params: &ArmaGarchParams,
    history: &ReturnSeries,
    presample_var: Option<f64>,
) -> Result<VolForecast> {
    params.validate()?;
    let values = history.values();
    let orders = params.orders();
    let max_lag = orders.ar.max(orders.ma).max(orders.arch).max(orders.garch);
    if values.len() <= max_lag {
        return Err(Error::NotEnoughData {
            what: "forecast history",
            need: max_lag + 1,
            have: values.len(),
        });
    }
    let presample = presample_var.unwrap_or_else(|| sample_variance(values));
    let f = filter_values(params, values, presample);
    let n = values.len();

    let mut m = 0.0;
    for (i, &a) in params.ar.iter().enumerate() {
        m += a * values[n - 1 - i];
    }
    for (j, &b) in params.ma.iter().enumerate() {
        m += b * f.eps[n - 1 - j];
    }
    let mut s2 = params.omega;
    for (i, &beta) in params.garch.iter().enumerate() {
        s2 += beta * f.sigma[n - 1 - i] * f.sigma[n - 1 - i];
    }
    for (j, &alpha) in params.arch.iter().enumerate() {
        s2 += alpha * f.eps[n - 1 - j] * f.eps[n - 1 - j];
    }
    Ok(VolForecast {
        mu_hat: m,
        sigma_hat: s2.sqrt(),
    })
}

// ---------------------------------------------------------------------------
// Quasi-likelihood with analytic gradients
// ---------------------------------------------------------------------------

/// Quasi-likelihood evaluator bound to a data window. Also produces
/// per-observation scores for the change-point machinery.
pub(crate) struct QuasiLikelihood<'a> {
    pub values: &'a [f64],
    pub orders: ArmaGarchOrders,
    pub presample: f64,
}

pub(crate) struct LikEval {
    /// Mean negative log-likelihood over the window.
    pub nll_mean: f64,
    /// Gradient of the mean NLL w.r.t. the natural parameters.
    pub grad_mean: Vec<f64>,
}

impl<'a> QuasiLikelihood<'a> {
    /// Mean NLL and its gradient. Returns `f64::INFINITY` as the value when
    /// a conditional variance degenerates.
    pub fn eval(&self, natural: &[f64]) -> LikEval {
        let d = self.orders.param_count();
        let n = self.values.len();
        let params = ArmaGarchParams::from_natural(self.orders, natural);
        let (p_ar, p_ma) = (self.orders.ar, self.orders.ma);
        let idx_omega = p_ar + p_ma;
        let idx_arch = idx_omega + 1;
        let idx_garch = idx_arch + self.orders.arch;

        let mut eps = vec![0.0; n];
        let mut sig2 = vec![0.0; n];
        // sensitivity histories, row-major n x d
        let mut deps = vec![0.0; n * d];
        let mut dsig2 = vec![0.0; n * d];

        let mut nll_sum = 0.0;
        let mut grad_sum = vec![0.0; d];

        for t in 0..n {
            // mean recursion and its sensitivities
            let mut m = 0.0;
            let mut dm = vec![0.0; d];
            for (i, &a) in params.ar.iter().enumerate() {
                let k = t as isize - (i as isize + 1);
                if k >= 0 {
                    m += a * self.values[k as usize];
                    dm[i] += self.values[k as usize];
                }
            }
            for (j, &b) in params.ma.iter().enumerate() {
                let k = t as isize - (j as isize + 1);
                if k >= 0 {
                    let ku = k as usize;
                    m += b * eps[ku];
                    dm[p_ar + j] += eps[ku];
                    for l in 0..d {
                        dm[l] += b * deps[ku * d + l];
                    }
                }
            }
            eps[t] = self.values[t] - m;
            for l in 0..d {
                deps[t * d + l] = -dm[l];
            }

            // variance recursion and its sensitivities
            let mut s2 = params.omega;
            let mut ds = vec![0.0; d];
            ds[idx_omega] = 1.0;
            for (i, &beta) in params.garch.iter().enumerate() {
                let k = t as isize - (i as isize + 1);
                if k >= 0 {
                    let ku = k as usize;
                    s2 += beta * sig2[ku];
                    ds[idx_garch + i] += sig2[ku];
                    for l in 0..d {
                        ds[l] += beta * dsig2[ku * d + l];
                    }
                } else {
                    s2 += beta * self.presample;
                    ds[idx_garch + i] += self.presample;
                }
            }
            for (j, &alpha) in params.arch.iter().enumerate() {
                let k = t as isize - (j as isize + 1);
                if k >= 0 {
                    let ku = k as usize;
                    let e = eps[ku];
                    s2 += alpha * e * e;
                    ds[idx_arch + j] += e * e;
                    for l in 0..d {
                        ds[l] += alpha * 2.0 * e * deps[ku * d + l];
                    }
                } else {
                    s2 += alpha * self.presample;
                    ds[idx_arch + j] += self.presample;
                }
            }
            if !(s2 > 1e-300) || !s2.is_finite() {
                return LikEval {
                    nll_mean: f64::INFINITY,
                    grad_mean: vec![0.0; d],
                };
            }
            sig2[t] = s2;
            dsig2[t * d..(t + 1) * d].copy_from_slice(&ds);

            let e = eps[t];
            let z2 = e * e / s2;
            nll_sum += 0.5 * (LN_2PI + s2.ln() + z2);
            for l in 0..d {
                grad_sum[l] += 0.5 * (ds[l] / s2 * (1.0 - z2) + 2.0 * e * deps[t * d + l] / s2);
            }
        }

        let nf = n as f64;
        LikEval {
            nll_mean: nll_sum / nf,
            grad_mean: grad_sum.iter().map(|g| g / nf).collect(),
        }
    }

    /// Per-observation NLL contributions and score rows (w.r.t. natural
    /// parameters), for likelihood-ratio scans.
    pub fn per_obs(&self, natural: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.orders.param_count();
        let n = self.values.len();
        let params = ArmaGarchParams::from_natural(self.orders, natural);
        let (p_ar, p_ma) = (self.orders.ar, self.orders.ma);
        let idx_omega = p_ar + p_ma;
        let idx_arch = idx_omega + 1;
        let idx_garch = idx_arch + self.orders.arch;

        let mut eps = vec![0.0; n];
        let mut sig2 = vec![0.0; n];
        let mut deps = vec![0.0; n * d];
        let mut dsig2 = vec![0.0; n * d];
        let mut nll = vec![0.0; n];
        let mut scores = vec![vec![0.0; d]; n];

        for t in 0..n {
            let mut m = 0.0;
            let mut dm = vec![0.0; d];
            for (i, &a) in params.ar.iter().enumerate() {
                let k = t as isize - (i as isize + 1);
                if k >= 0 {
                    m += a * self.values[k as usize];
                    dm[i] += self.values[k as usize];
                }
            }
            for (j, &b) in params.ma.iter().enumerate() {
                let k = t as isize - (j as isize + 1);
                if k >= 0 {
                    let ku = k as usize;
                    m += b * eps[ku];
                    dm[p_ar + j] += eps[ku];
                    for l in 0..d {
                        dm[l] += b * deps[ku * d + l];
                    }
                }
            }
            eps[t] = self.values[t] - m;
            for l in 0..d {
                deps[t * d + l] = -dm[l];
            }

            let mut s2 = params.omega;
            let mut ds = vec![0.0; d];
            ds[idx_omega] = 1.0;
            for (i, &beta) in params.garch.iter().enumerate() {
                let k = t as isize - (i as isize + 1);
                if k >= 0 {
                    let ku = k as usize;
                    s2 += beta * sig2[ku];
                    ds[idx_garch + i] += sig2[ku];
                    for l in 0..d {
                        ds[l] += beta * dsig2[ku * d + l];
                    }
                } else {
                    s2 += beta * self.presample;
                    ds[idx_garch + i] += self.presample;
                }
            }
            for (j, &alpha) in params.arch.iter().enumerate() {
                let k = t as isize - (j as isize + 1);
                if k >= 0 {
                    let ku = k as usize;
                    let e = eps[ku];
                    s2 += alpha * e * e;
                    ds[idx_arch + j] += e * e;
                    for l in 0..d {
                        ds[l] += alpha * 2.0 * e * deps[ku * d + l];
                    }
                } else {
                    s2 += alpha * self.presample;
                    ds[idx_arch + j] += self.presample;
                }
            }
            sig2[t] = s2.max(1e-300);
            dsig2[t * d..(t + 1) * d].copy_from_slice(&ds);

            let e = eps[t];
            let s2 = sig2[t];
            let z2 = e * e / s2;
            nll[t] = 0.5 * (LN_2PI + s2.ln() + z2);
            for l in 0..d {
                scores[t][l] = 0.5 * (ds[l] / s2 * (1.0 - z2) + 2.0 * e * deps[t * d + l] / s2);
            }
        }
        (nll, scores)
    }
}

// ---------------------------------------------------------------------------
// Constraint-free reparameterization
// ---------------------------------------------------------------------------

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn softplus_inv(y: f64) -> f64 {
    // inverse of ln(1 + e^x)
    if y > 30.0 {
        y
    } else {
        (y.exp() - 1.0).max(1e-300).ln()
    }
}

/// Maps between natural ARMA-GARCH parameters and the unconstrained vector
/// optimized by QMLE: `[ar.., ma.., u, v, c_1..c_m]` with `omega = exp(u)`,
/// persistence `s = sigmoid(v)` and coefficient shares
/// `softplus(c_k) / sum softplus(c)`.
pub(crate) struct GarchTransform {
    pub orders: ArmaGarchOrders,
}

impl GarchTransform {
    fn m(&self) -> usize {
        self.orders.arch + self.orders.garch
    }

    /// Length of the unconstrained vector: one coordinate more than the
    /// natural parameterization whenever ARCH/GARCH terms exist (budget +
    /// shares carry a single flat direction).
    pub fn dim(&self) -> usize {
        self.orders.param_count() + usize::from(self.m() > 0)
    }

    pub fn to_unconstrained(&self, params: &ArmaGarchParams) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.orders.param_count());
        u.extend_from_slice(&params.ar);
        u.extend_from_slice(&params.ma);
        u.push(params.omega.ln());
        if self.m() > 0 {
            let coefs: Vec<f64> = params.arch.iter().chain(&params.garch).copied().collect();
            let s: f64 = coefs.iter().sum::<f64>().clamp(1e-8, 1.0 - 1e-8);
            u.push((s / (1.0 - s)).ln());
            for &c in &coefs {
                let share = (c / s).max(1e-8);
                u.push(softplus_inv(share));
            }
        }
        u
    }

    pub fn to_natural(&self, u: &[f64]) -> Vec<f64> {
        let (p_ar, p_ma) = (self.orders.ar, self.orders.ma);
        let m = self.m();
        let mut nat = Vec::with_capacity(self.orders.param_count());
        nat.extend_from_slice(&u[..p_ar + p_ma]);
        nat.push(u[p_ar + p_ma].exp());
        if m > 0 {
            let s = sigmoid(u[p_ar + p_ma + 1]);
            let gs: Vec<f64> = (0..m).map(|k| softplus(u[p_ar + p_ma + 2 + k])).collect();
            let total: f64 = gs.iter().sum();
            for g in gs {
                nat.push(s * g / total);
            }
        }
        nat
    }

    /// Pull a gradient w.r.t. natural parameters back to the unconstrained
    /// coordinates.
    pub fn chain_grad(&self, u: &[f64], grad_natural: &[f64]) -> Vec<f64> {
        let (p_ar, p_ma) = (self.orders.ar, self.orders.ma);
        let m = self.m();
        let mut g = vec![0.0; u.len()];
        g[..p_ar + p_ma].copy_from_slice(&grad_natural[..p_ar + p_ma]);
        let idx_omega = p_ar + p_ma;
        g[idx_omega] = grad_natural[idx_omega] * u[idx_omega].exp();
        if m > 0 {
            let v = u[idx_omega + 1];
            let s = sigmoid(v);
            let gs: Vec<f64> = (0..m).map(|k| softplus(u[idx_omega + 2 + k])).collect();
            let total: f64 = gs.iter().sum();
            let shares: Vec<f64> = gs.iter().map(|x| x / total).collect();
            // d coef_k / dv = share_k * s * (1 - s)
            let mut gv = 0.0;
            for k in 0..m {
                gv += grad_natural[idx_omega + 1 + k] * shares[k] * s * (1.0 - s);
            }
            g[idx_omega + 1] = gv;
            // d coef_k / d c_j = s * sigmoid(c_j) * (delta_kj - share_k) / total
            let weighted: f64 = (0..m)
                .map(|k| grad_natural[idx_omega + 1 + k] * shares[k])
                .sum();
            for j in 0..m {
                let sig_c = sigmoid(u[idx_omega + 2 + j]);
                g[idx_omega + 2 + j] = s * sig_c * (grad_natural[idx_omega + 1 + j] - weighted) / total;
            }
        }
        g
    }
}

// ---------------------------------------------------------------------------
// QMLE fit
// ---------------------------------------------------------------------------

/// A fitted model with its achieved log-likelihood.
#[derive(Debug, Clone)]
pub struct QmleFit {
    pub params: ArmaGarchParams,
    pub log_likelihood: f64,
    pub iters: usize,
}

fn default_init(orders: ArmaGarchOrders, variance: f64) -> ArmaGarchParams {
    let arch_mass = 0.10;
    let garch_mass = 0.80;
    let (q, p) = (orders.arch, orders.garch);
    let arch = if q > 0 { vec![arch_mass / q as f64; q] } else { vec![] };
    let garch = if p > 0 { vec![garch_mass / p as f64; p] } else { vec![] };
    let persistence: f64 = arch.iter().chain(&garch).sum();
    ArmaGarchParams {
        ar: vec![0.0; orders.ar],
        ma: vec![0.0; orders.ma],
        omega: variance * (1.0 - persistence),
        arch,
        garch,
    }
}

/// Fit by Gaussian QMLE. `init` defaults to a mildly persistent start at
/// the sample variance. The optimizer is monotone, so the reported
/// log-likelihood is never below the log-likelihood at `init`.
pub fn qmle_fit(
    returns: &ReturnSeries,
    orders: ArmaGarchOrders,
    init: Option<ArmaGarchParams>,
) -> Result<QmleFit> {
    qmle_fit_values(returns.values(), orders, init, &Options::default())
}

pub(crate) fn qmle_fit_values(
    values: &[f64],
    orders: ArmaGarchOrders,
    init: Option<ArmaGarchParams>,
    opts: &Options,
) -> Result<QmleFit> {
    let d = orders.param_count();
    if values.len() < 10 * d {
        return Err(Error::NotEnoughData {
            what: "QMLE window",
            need: 10 * d,
            have: values.len(),
        });
    }
    let variance = sample_variance(values);
    if !(variance > 1e-300) || !variance.is_finite() {
        return Err(Error::Degenerate("constant series has no scale to fit".into()));
    }
    let init = init.unwrap_or_else(|| default_init(orders, variance));
    init.validate()?;
    if init.orders() != orders {
        return Err(Error::InvalidParams("init parameter orders mismatch".into()));
    }

    let lik = QuasiLikelihood {
        values,
        orders,
        presample: variance,
    };
    let transform = GarchTransform { orders };
    let u0 = transform.to_unconstrained(&init);
    debug_assert_eq!(u0.len(), transform.dim());

    let result: Minimum = minimize(
        |u, g| {
            let nat = transform.to_natural(u);
            let eval = lik.eval(&nat);
            if eval.nll_mean.is_finite() {
                let gu = transform.chain_grad(u, &eval.grad_mean);
                g.copy_from_slice(&gu);
            } else {
                g.iter_mut().for_each(|x| *x = 0.0);
            }
            eval.nll_mean
        },
        &u0,
        opts,
    );

    let nat = transform.to_natural(&result.x);
    let params = ArmaGarchParams::from_natural(orders, &nat);
    let log_likelihood = -result.value * values.len() as f64;
    if !result.converged {
        return Err(Error::NoConvergence {
            iters: result.iters,
            best_objective: result.value,
            best_params: nat,
        });
    }
    params.validate()?;
    Ok(QmleFit {
        params,
        log_likelihood,
        iters: result.iters,
    })
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Innovation distribution for simulated paths.
#[derive(Debug, Clone, Copy)]
pub enum Innovations {
    Gaussian,
    /// Student-t with `df > 2`, scaled to unit variance.
    StudentT { df: f64 },
}

/// Simulate an ARMA-GARCH path of length `n` after a `burn_in` prefix.
pub fn simulate<R: Rng + ?Sized>(
    params: &ArmaGarchParams,
    n: usize,
    burn_in: usize,
    innovations: Innovations,
    rng: &mut R,
) -> Result<Vec<f64>> {
    params.validate()?;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let student = match innovations {
        Innovations::StudentT { df } => {
            if df <= 2.0 {
                return Err(Error::InvalidParams("Student-t df must exceed 2".into()));
            }
            Some((StudentT::new(df).expect("valid df"), ((df - 2.0) / df).sqrt()))
        }
        Innovations::Gaussian => None,
    };

    let total = n + burn_in;
    let var0 = params.unconditional_variance();
    let mut xs = Vec::with_capacity(total);
    let mut eps = Vec::with_capacity(total);
    let mut sig2 = Vec::with_capacity(total);

    for t in 0..total {
        let mut s2 = params.omega;
        for (i, &beta) in params.garch.iter().enumerate() {
            let k = t as isize - (i as isize + 1);
            s2 += beta * if k >= 0 { sig2[k as usize] } else { var0 };
        }
        for (j, &alpha) in params.arch.iter().enumerate() {
            let k = t as isize - (j as isize + 1);
            s2 += alpha
                * if k >= 0 {
                    let e: f64 = eps[k as usize];
                    e * e
                } else {
                    var0
                };
        }
        let z = match &student {
            Some((dist, scale)) => dist.sample(rng) * scale,
            None => normal.sample(rng),
        };
        let e = z * s2.sqrt();
        let mut m = 0.0;
        for (i, &a) in params.ar.iter().enumerate() {
            let k = t as isize - (i as isize + 1);
            if k >= 0 {
                m += a * xs[k as usize];
            }
        }
        for (j, &b) in params.ma.iter().enumerate() {
            let k = t as isize - (j as isize + 1);
            if k >= 0 {
                m += b * eps[k as usize];
            }
        }
        xs.push(m + e);
        eps.push(e);
        sig2.push(s2);
    }
    Ok(xs.split_off(burn_in))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::central_diff_grad;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn series(values: Vec<f64>) -> ReturnSeries {
        let ts: Vec<i64> = (0..values.len() as i64).collect();
        ReturnSeries::new(ts, values).unwrap()
    }

    fn garch11(omega: f64, alpha: f64, beta: f64) -> ArmaGarchParams {
        ArmaGarchParams {
            ar: vec![],
            ma: vec![],
            omega,
            arch: vec![alpha],
            garch: vec![beta],
        }
    }

    #[test]
    fn zero_feedback_gives_constant_variance() {
        let params = ArmaGarchParams {
            ar: vec![],
            ma: vec![],
            omega: 0.25,
            arch: vec![],
            garch: vec![],
        };
        let r = series(vec![0.1, -0.3, 0.2, 0.0]);
        let f = garch_filter(&params, &r, Some(1.0)).unwrap();
        assert!(f.sigma.iter().all(|&s| (s - 0.5).abs() < 1e-15));
        assert!(f.mu.iter().all(|&m| m == 0.0));
        assert_eq!(f.eps, r.values());
    }

    #[test]
    fn hand_unrolled_garch11_three_steps() {
        // omega .1, alpha .2, beta .7, presample 0.5, x = [.1, -.2, .05]
        let params = garch11(0.1, 0.2, 0.7);
        let r = series(vec![0.1, -0.2, 0.05]);
        let f = garch_filter(&params, &r, Some(0.5)).unwrap();
        let expect = [
            0.1 + 0.7 * 0.5 + 0.2 * 0.5,            // 0.55
            0.1 + 0.7 * 0.55 + 0.2 * 0.01,          // 0.487
            0.1 + 0.7 * 0.487 + 0.2 * 0.04,         // 0.4489
        ];
        for (s, e) in f.sigma.iter().zip(expect) {
            assert_relative_eq!(s * s, e, epsilon = 1e-15);
        }
        // continue one step: forecast
        let fc = forecast(&params, &r, Some(0.5)).unwrap();
        let s4 = 0.1 + 0.7 * 0.4489 + 0.2 * 0.0025;
        assert_relative_eq!(fc.sigma_hat * fc.sigma_hat, s4, epsilon = 1e-15);
        assert_eq!(fc.mu_hat, 0.0);
    }

    #[test]
    fn arma_mean_recursion_hand_check() {
        let params = ArmaGarchParams {
            ar: vec![0.5],
            ma: vec![0.3],
            omega: 1.0,
            arch: vec![],
            garch: vec![],
        };
        let r = series(vec![1.0, 2.0, 3.0]);
        let f = garch_filter(&params, &r, Some(1.0)).unwrap();
        assert_relative_eq!(f.mu[0], 0.0);
        assert_relative_eq!(f.eps[0], 1.0);
        assert_relative_eq!(f.mu[1], 0.5 * 1.0 + 0.3 * 1.0, epsilon = 1e-15);
        assert_relative_eq!(f.eps[1], 2.0 - 0.8, epsilon = 1e-15);
        assert_relative_eq!(f.mu[2], 0.5 * 2.0 + 0.3 * 1.2, epsilon = 1e-15);
        assert_relative_eq!(f.eps[2], 3.0 - 1.36, epsilon = 1e-15);
    }

    #[test]
    fn nonstationary_params_rejected() {
        let params = garch11(0.1, 0.5, 0.6);
        let r = series(vec![0.0, 1.0]);
        assert!(matches!(
            garch_filter(&params, &r, Some(1.0)),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn simulated_long_run_variance() {
        let params = garch11(0.1, 0.1, 0.8);
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let xs = simulate(&params, 200_000, 500, Innovations::Gaussian, &mut rng).unwrap();
        let var = sample_variance(&xs);
        // unconditional variance omega/(1-alpha-beta) = 1.0
        assert!((var - 1.0).abs() < 0.05, "sample variance {var}");
    }

    #[test]
    fn forecast_consistency_with_refiltered_series() {
        let params = ArmaGarchParams {
            ar: vec![0.2],
            ma: vec![0.1],
            omega: 0.05,
            arch: vec![0.1],
            garch: vec![0.8],
        };
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let xs = simulate(&params, 300, 100, Innovations::Gaussian, &mut rng).unwrap();
        let presample = 0.7;
        let history = series(xs[..299].to_vec());
        let fc = forecast(&params, &history, Some(presample)).unwrap();
        let full = series(xs.clone());
        let f = garch_filter(&params, &full, Some(presample)).unwrap();
        assert_relative_eq!(fc.mu_hat, f.mu[299], epsilon = 1e-12);
        assert_relative_eq!(fc.sigma_hat, f.sigma[299], epsilon = 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        // both a plain GARCH(1,1) and the paper-sized ARMA(3,1)-GARCH(1,2)
        let mut rng = ChaCha12Rng::seed_from_u64(1234);
        let gen_params = garch11(0.05, 0.1, 0.85);
        let xs = simulate(&gen_params, 400, 100, Innovations::Gaussian, &mut rng).unwrap();

        for orders in [
            ArmaGarchOrders { ar: 0, ma: 0, arch: 1, garch: 1 },
            ArmaGarchOrders { ar: 3, ma: 1, arch: 1, garch: 2 },
        ] {
            let lik = QuasiLikelihood {
                values: &xs,
                orders,
                presample: sample_variance(&xs),
            };
            let transform = GarchTransform { orders };
            for trial in 0..10 {
                // random interior point in unconstrained coordinates
                let mut u = vec![0.0; transform.dim()];
                for x in u.iter_mut() {
                    *x = 0.6 * (rng.random::<f64>() - 0.5);
                }
                u[orders.ar + orders.ma] = -3.0 + rng.random::<f64>(); // log omega
                let (val, grad) = {
                    let nat = transform.to_natural(&u);
                    let e = lik.eval(&nat);
                    (e.nll_mean, transform.chain_grad(&u, &e.grad_mean))
                };
                assert!(val.is_finite());
                let fd = central_diff_grad(
                    |p| lik.eval(&transform.to_natural(p)).nll_mean,
                    &u,
                    1e-6,
                );
                for i in 0..u.len() {
                    let denom = grad[i].abs().max(fd[i].abs()).max(1e-8);
                    let rel = (grad[i] - fd[i]).abs() / denom;
                    assert!(
                        rel < 1e-4,
                        "trial {trial} param {i}: analytic {} vs fd {} (rel {rel})",
                        grad[i],
                        fd[i]
                    );
                }
            }
        }
    }

    #[test]
    fn iid_gaussian_fit_degenerates_to_sample_variance() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let normal = Normal::new(0.0, 2.0).unwrap();
        let xs: Vec<f64> = (0..5000).map(|_| normal.sample(&mut rng)).collect();
        let var = sample_variance(&xs);
        let orders = ArmaGarchOrders { ar: 0, ma: 0, arch: 1, garch: 1 };
        // neutral low-persistence start: on i.i.d. data the persistence
        // budget collapses and omega absorbs the variance
        let init = garch11(0.9 * var, 0.05, 0.05);
        let fit = qmle_fit_values(&xs, orders, Some(init), &Options::default()).unwrap();
        let persistence = fit.params.arch[0] + fit.params.garch[0];
        assert!(persistence < 0.06, "persistence {persistence}");
        // 3 sigma of the sample-variance estimator: var * sqrt(2/n) * 3
        let tol = var * (2.0 / 5000.0f64).sqrt() * 3.0;
        assert!(
            (fit.params.unconditional_variance() - var).abs() < tol + 0.05 * var,
            "uncond var {} vs sample {var}",
            fit.params.unconditional_variance()
        );
    }

    #[test]
    fn garch11_parameter_recovery() {
        let truth = garch11(0.05, 0.10, 0.85);
        for seed in [21u64, 22] {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let xs = simulate(&truth, 20_000, 500, Innovations::Gaussian, &mut rng).unwrap();
            let orders = ArmaGarchOrders { ar: 0, ma: 0, arch: 1, garch: 1 };
            let fit = qmle_fit_values(&xs, orders, None, &Options::default()).unwrap();
            assert!((fit.params.omega - 0.05).abs() <= 0.05, "omega {}", fit.params.omega);
            assert!((fit.params.arch[0] - 0.10).abs() <= 0.05, "alpha {}", fit.params.arch[0]);
            assert!((fit.params.garch[0] - 0.85).abs() <= 0.05, "beta {}", fit.params.garch[0]);
        }
    }

    #[test]
    fn constant_series_is_degenerate() {
        let xs = vec![0.5; 400];
        let orders = ArmaGarchOrders { ar: 0, ma: 0, arch: 1, garch: 1 };
        assert!(matches!(
            qmle_fit_values(&xs, orders, None, &Options::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn likelihood_not_below_init() {
        let truth = garch11(0.05, 0.10, 0.85);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let xs = simulate(&truth, 3000, 200, Innovations::Gaussian, &mut rng).unwrap();
        let orders = ArmaGarchOrders { ar: 0, ma: 0, arch: 1, garch: 1 };
        let init = garch11(0.2, 0.3, 0.3);
        let lik = QuasiLikelihood {
            values: &xs,
            orders,
            presample: sample_variance(&xs),
        };
        let init_ll = -lik.eval(&init.to_natural()).nll_mean * xs.len() as f64;
        let fit = qmle_fit_values(&xs, orders, Some(init), &Options::default()).unwrap();
        assert!(fit.log_likelihood >= init_ll);
        assert!(fit.params.validate().is_ok());
    }
}
