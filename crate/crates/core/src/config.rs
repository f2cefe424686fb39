//! TOML run configuration shared by the library drivers and the CLI.
//!
//! Every key is optional; unknown keys are ignored so older binaries can
//! read newer files. `BacktestConfig::default().to_toml()` prints the full
//! set of defaults.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{FilterSpec, WindowSpec};
use crate::engine::TraceWriter;
use crate::error::{Error, Result};
use crate::phase1::{Mandate, Phase1Config};
use crate::phase2::Phase2Config;
use crate::portfolio::ConstraintSet;
use crate::synthetic::{SyntheticSpec, PRICE_FILE_NAME, RISK_FREE_FILE_NAME};

fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPaths {
    /// Directory holding `scores_YYYY-MM-DD.csv` files.
    #[serde(default = "default_data_dir")]
    pub dir: PathBuf,
    /// Defaults to `<dir>/prices.csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<PathBuf>,
    /// Defaults to `<dir>/risk_free.csv` when that file exists, otherwise a
    /// zero rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_free: Option<PathBuf>,
}

impl Default for DataPaths {
    fn default() -> Self {
        DataPaths {
            dir: default_data_dir(),
            prices: None,
            risk_free: None,
        }
    }
}

impl DataPaths {
    pub fn price_file(&self) -> PathBuf {
        self.prices.clone().unwrap_or_else(|| self.dir.join(PRICE_FILE_NAME))
    }

    pub fn risk_free_file(&self) -> Option<PathBuf> {
        match &self.risk_free {
            Some(p) => Some(p.clone()),
            None => {
                let p = self.dir.join(RISK_FREE_FILE_NAME);
                p.exists().then_some(p)
            }
        }
    }
}

fn default_cost_bps() -> f64 {
    10.0
}
fn default_output_prefix() -> PathBuf {
    PathBuf::from("out/backtest")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestSettings {
    /// Proportional cost per unit of traded value, charged on both sides.
    #[serde(default = "default_cost_bps")]
    pub transaction_cost_bps: f64,
    /// Rebalance dates; every score file in the data directory when empty.
    #[serde(default)]
    pub rebalance_dates: Vec<NaiveDate>,
    /// Stop after this many periods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_periods: Option<usize>,
    #[serde(default = "default_output_prefix")]
    pub output_prefix: PathBuf,
}

impl Default for BacktestSettings {
    fn default() -> Self {
        BacktestSettings {
            transaction_cost_bps: default_cost_bps(),
            rebalance_dates: Vec::new(),
            max_periods: None,
            output_prefix: default_output_prefix(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BacktestConfig {
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub mandate: Mandate,
    #[serde(default)]
    pub data: DataPaths,
    #[serde(default)]
    pub constraints: ConstraintSet,
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default)]
    pub window: WindowSpec,
    #[serde(default)]
    pub phase1: Phase1Config,
    #[serde(default)]
    pub phase2: Phase2Config,
    #[serde(default)]
    pub backtest: BacktestSettings,
    /// Used by `gen-data`.
    #[serde(default)]
    pub synthetic: SyntheticSpec,
    #[serde(skip)]
    pub trace: Option<TraceWriter>,
}

impl BacktestConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: BacktestConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.constraints.validate()?;
        self.phase1.large_cap.validate()?;
        self.phase1.growth.validate()?;
        self.phase2.params.validate()?;
        self.phase2.turnover.validate()?;
        if self.backtest.transaction_cost_bps.is_nan() || self.backtest.transaction_cost_bps < 0.0 {
            return Err(Error::Config("transaction_cost_bps must be non-negative".into()));
        }
        if self.backtest.rebalance_dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("rebalance_dates must be strictly increasing".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let text = BacktestConfig::default().to_toml().unwrap();
        let back = BacktestConfig::from_toml(&text).unwrap();
        assert_eq!(back.to_toml().unwrap(), text);
        assert_eq!(back.phase1.large_cap.population_size, 500);
        assert_eq!(back.phase1.growth.population_size, 50);
        assert_eq!(back.phase2.params.generations, 600);
        assert_eq!(back.backtest.transaction_cost_bps, 10.0);
    }

    #[test]
    fn unknown_keys_are_ignored() {
        let cfg = BacktestConfig::from_toml(
            "rng_seed = 9\nfuture_option = true\nmandate = \"large_cap_growth\"\n[phase2]\nstrategy = \"ledger_full\"\nnew_knob = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.rng_seed, 9);
        assert_eq!(cfg.mandate, Mandate::LargeCapGrowth);
        assert_eq!(cfg.phase2.strategy, crate::phase2::RepairStrategy::LedgerFull);
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(matches!(BacktestConfig::from_toml("rng_seed = \"x\""), Err(Error::Config(_))));
        assert!(BacktestConfig::from_toml("[phase2.params]\npopulation_size = 1\ngenerations = 1\nmutation_rate = 0.1").is_err());
    }

    #[test]
    fn missing_file_names_path() {
        let err = BacktestConfig::load(Path::new("/no/such/config.toml")).unwrap_err();
        assert!(err.to_string().contains("/no/such/config.toml"));
    }
}
