//! Price/return handling, rolling risk targets, labels, signals and the
//! feasibility bound that ties classifier quality to the risk constraint.

mod costs;
mod folds;
mod series;
mod targets;

pub use costs::{class_costs, CostMatrix};
pub use folds::time_series_folds;
pub use series::{log_returns, PriceSeries, ProbabilitySeries, ReturnSeries};
pub use targets::{
    exceedance_rate, make_labels, min_tpr, oracle_signals, rolling_hist_var, AlignedTarget,
    BinarySignals, LabelSeries, RiskTargetSpec, TvarSeries,
};
