//! Two-price toy market for learning checks: no FCR, zero frequency
//! deviation, and imbalance prices that alternate between a low and a high
//! level every quarter hour.

use std::sync::Arc;

use chrono::{TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::{EnvConfig, ImbalanceEnv, RewardConfig};
use crate::bidding::BidSchedule;
use crate::error::{Error, Result};
use crate::market::{FcrPriceSeries, FrequencyTrace, ImbalancePriceSeries, MarketDataset, MINUTES_PER_DAY};
use crate::model::{BatteryParams, FcrConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyConfig {
    /// Days from 1 January 2022; days 1-20 train, 21-25 validate.
    pub days: usize,
    pub episode_min: usize,
    pub low_price: f64,
    pub high_price: f64,
    pub p_nom: f64,
    pub e_cap: f64,
    pub eta: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            days: 25,
            episode_min: 240,
            low_price: -100.0,
            high_price: 100.0,
            p_nom: 10.0,
            e_cap: 1.0,
            eta: 0.9,
        }
    }
}

impl ToyConfig {
    pub fn params(&self) -> Result<BatteryParams> {
        BatteryParams::new(self.p_nom, self.e_cap, self.eta, self.eta)
    }

    /// Settlement price of quarter `q`: low on even quarters, high on odd ones.
    pub fn price(&self, quarter: usize) -> f64 {
        if quarter.is_multiple_of(2) {
            self.low_price
        } else {
            self.high_price
        }
    }

    pub fn dataset(&self) -> Result<MarketDataset> {
        if self.days == 0 || self.days > 31 {
            return Err(Error::InvalidParameter(format!(
                "toy days must lie in 1..=31, got {}",
                self.days
            )));
        }
        let start = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
        let quarters = self.days * MINUTES_PER_DAY / 15;
        MarketDataset::new(
            FrequencyTrace {
                start,
                deviations_mhz: vec![0.0; quarters * 900],
            },
            ImbalancePriceSeries::with_perfect_indicator(start, (0..quarters).map(|q| self.price(q)).collect()),
            FcrPriceSeries::new(start, vec![0.0; quarters / 16])?,
        )
    }

    /// Environment with a zero-bid schedule and cash-only reward.
    pub fn environment(&self) -> Result<ImbalanceEnv> {
        let dataset = Arc::new(self.dataset()?);
        let schedule = BidSchedule::uniform(dataset.start(), dataset.n_blocks(), 0);
        ImbalanceEnv::new(
            dataset,
            &schedule,
            self.params()?,
            FcrConfig::default(),
            RewardConfig::cash_only(),
            EnvConfig {
                episode_min: self.episode_min,
                ..EnvConfig::default()
            },
        )
    }
}
