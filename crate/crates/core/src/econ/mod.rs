//! Parametric and local-parametric exceedance-probability models.

pub mod carl;
pub mod garch;
pub mod gpd;
pub mod lpa;

pub use carl::{carlvol_fit, carlvol_nll, carlvol_prob, CarlVolParams};
pub use garch::{
    forecast, garch_filter, qmle_fit, simulate, ArmaGarchOrders, ArmaGarchParams, GarchFilter,
    Innovations, QmleFit, VolForecast,
};
pub use gpd::{
    exceedance_prob_evt, exceedance_prob_normal, gpd_cdf, gpd_fit, loss_quantile_evt,
    loss_quantile_normal, GpdParams,
};
pub use lpa::{ladder, lpa_select_interval, HomogeneityInterval, LpaConfig};
