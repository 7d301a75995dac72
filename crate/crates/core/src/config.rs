//! Experiment configuration: one TOML file, validated as a whole.

use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::agent::TrainConfig;
use crate::bidding::MonteCarloPlan;
use crate::env::toy::ToyConfig;
use crate::env::{EnvConfig, RewardConfig};
use crate::error::{Error, Result};
use crate::heuristic::HeuristicConfig;
use crate::market::{is_block_boundary, OuParams, PriceProfile, Split};
use crate::model::{BatteryParams, FcrConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Directory holding `frequency.csv`, `imbalance_settlement.csv`,
    /// optionally `imbalance_indicator.csv`, and `fcr.csv`. When unset, the
    /// run directory's `data/` is used if present, else data is synthesised.
    pub dir: Option<PathBuf>,
}

#[allow(clippy::derivable_impls)]
impl Default for DataConfig {
    fn default() -> Self {
        Self { dir: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub start: DateTime<Utc>,
    pub days: usize,
    pub frequency: OuParams,
    pub prices: PriceProfile,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            start: Utc.with_ymd_and_hms(2022, 1, 18, 0, 0, 0).unwrap(),
            days: 11,
            frequency: OuParams::default(),
            prices: PriceProfile::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub split: Split,
    /// Write a per-step trace CSV for every evaluated day.
    pub write_traces: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            split: Split::Test,
            write_traces: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    /// Bin edges for the FCR clearing price, EUR/MW per block.
    pub fcr_price_edges: Vec<f64>,
    /// Bin edges for the within-block settlement price std, EUR/MWh.
    pub sigma_edges: Vec<f64>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            fcr_price_edges: vec![0.0, 10.0, 20.0, 30.0, 40.0, 60.0, 100.0, 1e9],
            sigma_edges: vec![0.0, 25.0, 50.0, 75.0, 100.0, 150.0, 250.0, 1e9],
        }
    }
}

impl ReportConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, edges) in [("fcr_price_edges", &self.fcr_price_edges), ("sigma_edges", &self.sigma_edges)] {
            if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidParameter(format!(
                    "report.{name} needs at least two strictly increasing edges"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub battery: BatteryParams,
    pub fcr: FcrConfig,
    pub heuristic: HeuristicConfig,
    pub monte_carlo: MonteCarloPlan,
    pub reward: RewardConfig,
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub synth: SynthConfig,
    pub evaluate: EvaluateConfig,
    pub report: ReportConfig,
    /// When present, `train` and `evaluate` run on the two-price toy market
    /// instead of the configured data.
    pub toy: Option<ToyConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            battery: BatteryParams::default(),
            fcr: FcrConfig::default(),
            heuristic: HeuristicConfig::default(),
            monte_carlo: MonteCarloPlan::default(),
            reward: RewardConfig::default(),
            env: EnvConfig::default(),
            train: TrainConfig::default(),
            data: DataConfig::default(),
            synth: SynthConfig::default(),
            evaluate: EvaluateConfig::default(),
            report: ReportConfig::default(),
            toy: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.train.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every section; the message names the failing section.
    pub fn validate(&self) -> Result<()> {
        let section = |name: &str, r: Result<()>| {
            r.map_err(|e| Error::Config(format!("[{name}] {e}")))
        };
        section("battery", self.battery.validate())?;
        section("fcr", self.fcr.validate())?;
        section("heuristic", self.heuristic.validate())?;
        section("monte_carlo", self.monte_carlo.validate())?;
        section("reward", self.reward.validate())?;
        section("env", self.env.validate())?;
        section("train", self.train.validate())?;
        section("synth", self.synth.frequency.validate())?;
        section("synth", self.synth.prices.validate())?;
        section("report", self.report.validate())?;
        if !is_block_boundary(self.synth.start) {
            return Err(Error::Config(format!(
                "[synth] start {} must fall on a 4-hour block boundary",
                self.synth.start
            )));
        }
        if self.synth.days == 0 {
            return Err(Error::Config("[synth] days must be >= 1".into()));
        }
        if let Some(toy) = &self.toy {
            section("toy", toy.params().map(|_| ()))?;
        }
        Ok(())
    }
}
