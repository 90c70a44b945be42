//! Dynamic tail-risk protection toolkit.
//!
//! Everything needed to run a hedging strategy that keeps a portfolio's
//! Value-at-Risk below a rolling, investor-defined target:
//!
//! * [`timeseries`] — returns, rolling historical-VaR targets, 3-class
//!   labels, exceedance accounting and the minimum-TPR feasibility bound;
//! * [`econ`] — ARMA-GARCH (normal and GPD-tail), CARL-vol and
//!   change-point-aware local GARCH exceedance-probability models;
//! * [`nn`] — from-scratch MLP and LSTM classifiers with momentum features;
//! * [`ensemble`] — ridge stacking of the level-0 probability series;
//! * [`metrics`] — ROC/AUC and their cost-weighted variants;
//! * [`strategy`] — tail-loss-optimal threshold selection, fee-aware
//!   backtesting, benchmark strategies and the trend-switching overlay;
//! * [`synth`] — regime-switching GARCH path generator for fixtures;
//! * [`io`] — the CSV/JSON artifact formats shared with the CLI.

pub mod econ;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod strategy;
pub mod synth;
pub mod timeseries;

pub use error::{Error, Result};
