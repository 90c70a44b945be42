//! Run configuration: one TOML file drives the whole pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tailrisk::econ::ArmaGarchOrders;
use tailrisk::error::{Error, Result};

pub const KNOWN_MODELS: [&str; 6] = [
    "mlp",
    "lstm",
    "arma_garch",
    "arma_evtgarch",
    "carl_vol",
    "lpa_garch",
];

/// Environment variable supplying the default output directory.
pub const OUTPUT_DIR_ENV: &str = "TAILRISK_OUT";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Raw price CSV (`timestamp,close`).
    pub data: PathBuf,
    /// Output directory; falls back to `TAILRISK_OUT`, then `./out`.
    pub output_dir: Option<PathBuf>,
    /// `error` or `ffill`.
    #[serde(default = "default_gaps")]
    pub gaps: String,
    /// Last timestamp (inclusive) of the training range, ISO-8601.
    pub train_end: String,
    /// Optional truncation of the test range, ISO-8601.
    pub test_end: Option<String>,
    /// Risk targets to run, one cell each.
    pub targets: Vec<TargetSpec>,
    /// Level-0 model roster.
    pub models: Vec<String>,
    #[serde(default = "default_fee")]
    pub fee_rate: f64,
    #[serde(default)]
    pub seed: u64,
    /// Force single-threaded execution for bit reproducibility.
    #[serde(default = "default_true")]
    pub strict: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Decisions from the train tail used to pick probability thresholds.
    #[serde(default = "default_calibration")]
    pub calibration_points: usize,
    #[serde(default)]
    pub econ: EconConfig,
    #[serde(default)]
    pub lpa: LpaSection,
    #[serde(default)]
    pub nn: NnConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub varspread: VarspreadConfig,
    #[serde(default)]
    pub switch: SwitchConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub alpha: f64,
    pub window: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconConfig {
    /// Rolling calibration window in observations.
    pub window: usize,
    /// Refit cadence in test decisions.
    pub recalibrate_every: usize,
    pub orders: OrdersConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrdersConfig {
    pub ar: usize,
    pub ma: usize,
    pub arch: usize,
    pub garch: usize,
}

impl From<OrdersConfig> for ArmaGarchOrders {
    fn from(o: OrdersConfig) -> Self {
        ArmaGarchOrders {
            ar: o.ar,
            ma: o.ma,
            arch: o.arch,
            garch: o.garch,
        }
    }
}

impl Default for EconConfig {
    fn default() -> Self {
        // paper-scale defaults: four-month window, hourly recalibration,
        // ARMA(3,1)-GARCH(1,2)
        Self {
            window: 2880,
            recalibrate_every: 1,
            orders: OrdersConfig {
                ar: 3,
                ma: 1,
                arch: 1,
                garch: 2,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpaSection {
    /// Selection cadence in test decisions.
    pub every: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub step: usize,
    pub bootstrap_reps: usize,
    pub block_len: usize,
}

impl Default for LpaSection {
    fn default() -> Self {
        Self {
            every: 5,
            min_len: 240,
            max_len: 2880,
            step: 5,
            bootstrap_reps: 100,
            block_len: 24,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NnConfig {
    /// Retraining cadence in test decisions.
    pub retrain_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub validation_fraction: f64,
}

impl Default for NnConfig {
    fn default() -> Self {
        Self {
            retrain_every: 824,
            epochs: 100,
            batch_size: 128,
            learning_rate: 1e-3,
            patience: 10,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub lambda: f64,
    pub warmup: usize,
    /// Trailing window of resolved pairs; 0 means expanding.
    pub window: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            warmup: 200,
            window: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarspreadConfig {
    pub window: usize,
    pub z_crit: f64,
}

impl Default for VarspreadConfig {
    fn default() -> Self {
        Self {
            window: 240,
            z_crit: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchConfig {
    /// Moving-average length of the trend indicator, in hours.
    pub ma_len: usize,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        Self { ma_len: 2880 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Fold length (decisions) for the cross-validated metric table.
    pub fold_len: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { fold_len: 824 }
    }
}

fn default_gaps() -> String {
    "error".into()
}

fn default_fee() -> f64 {
    0.001
}

fn default_true() -> bool {
    true
}

fn default_workers() -> usize {
    1
}

fn default_calibration() -> usize {
    800
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParams(format!("{}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::InvalidParams(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidParams(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::InvalidParams("at least one (alpha, window) target".into()));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidParams("at least one model in the roster".into()));
        }
        for m in &self.models {
            if !KNOWN_MODELS.contains(&m.as_str()) {
                return Err(Error::InvalidParams(format!(
                    "unknown model {m:?}; known: {KNOWN_MODELS:?}"
                )));
            }
        }
        for t in &self.targets {
            if !(t.alpha > 0.0 && t.alpha < 0.5) {
                return Err(Error::InvalidParams(format!(
                    "target alpha must lie in (0, 0.5), got {}",
                    t.alpha
                )));
            }
            if t.window < 2 {
                return Err(Error::InvalidParams("target window must be >= 2".into()));
            }
        }
        if !matches!(self.gaps.as_str(), "error" | "ffill") {
            return Err(Error::InvalidParams(format!(
                "gaps must be \"error\" or \"ffill\", got {:?}",
                self.gaps
            )));
        }
        if !(self.fee_rate >= 0.0 && self.fee_rate < 1.0) {
            return Err(Error::InvalidParams("fee_rate must lie in [0, 1)".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParams("workers must be >= 1".into()));
        }
        Ok(())
    }

    /// Effective worker count after the strict-mode override.
    pub fn effective_workers(&self) -> usize {
        if self.strict {
            1
        } else {
            self.workers
        }
    }

    pub fn resolve_output_dir(&self) -> PathBuf {
        if let Some(dir) = &self.output_dir {
            return dir.clone();
        }
        if let Ok(env_dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !env_dir.is_empty() {
                return PathBuf::from(env_dir);
            }
        }
        PathBuf::from("out")
    }
}
