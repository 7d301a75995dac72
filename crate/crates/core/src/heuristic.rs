//! Rule-based imbalance controller used inside the Monte-Carlo rollouts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::percentile;
use crate::model::{BatteryParams, SoeBand};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeuristicConfig {
    /// Below `lo + zone_low * width` the controller charges.
    pub zone_low: f64,
    /// Above `lo + zone_high * width` the controller discharges.
    pub zone_high: f64,
    pub buy_percentile: f64,
    pub sell_percentile: f64,
    /// Share of the residual power used per action.
    pub power_fraction: f64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            zone_low: 0.15,
            zone_high: 0.85,
            buy_percentile: 20.0,
            sell_percentile: 80.0,
            power_fraction: 1.0,
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.zone_low && self.zone_low < self.zone_high && self.zone_high < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "heuristic zones need 0 < low < high < 1, got ({}, {})",
                self.zone_low, self.zone_high
            )));
        }
        if !(0.0 <= self.buy_percentile
            && self.buy_percentile < self.sell_percentile
            && self.sell_percentile <= 100.0)
        {
            return Err(Error::InvalidParameter(format!(
                "heuristic percentiles need 0 <= buy < sell <= 100, got ({}, {})",
                self.buy_percentile, self.sell_percentile
            )));
        }
        if !(self.power_fraction > 0.0 && self.power_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "power_fraction must lie in (0, 1], got {}",
                self.power_fraction
            )));
        }
        Ok(())
    }
}

/// Price levels that trigger opportunistic trades, EUR/MWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceThresholds {
    pub buy: f64,
    pub sell: f64,
}

impl PriceThresholds {
    /// Thresholds from a reference price sample (the training period).
    pub fn from_prices(prices: &[f64], cfg: &HeuristicConfig) -> Self {
        Self {
            buy: percentile(prices, cfg.buy_percentile),
            sell: percentile(prices, cfg.sell_percentile),
        }
    }
}

/// Imbalance setpoint in MW (+ = inject) for the next control interval.
///
/// Rules in priority order: corrective zones, then price triggers, then idle.
/// The result is clipped so that the setpoint alone keeps the stored energy
/// inside `band` over `interval_h`.
#[allow(clippy::too_many_arguments)]
pub fn heuristic_action(
    energy: f64,
    band: &SoeBand,
    price: f64,
    thresholds: &PriceThresholds,
    residual_mw: f64,
    interval_h: f64,
    params: &BatteryParams,
    cfg: &HeuristicConfig,
) -> f64 {
    let power = cfg.power_fraction * residual_mw.max(0.0);
    let low_edge = band.lo + cfg.zone_low * band.width();
    let high_edge = band.lo + cfg.zone_high * band.width();

    let wanted = if energy < low_edge {
        -power
    } else if energy > high_edge {
        power
    } else if price <= thresholds.buy && price < thresholds.sell {
        -power
    } else if price >= thresholds.sell && price > thresholds.buy {
        power
    } else {
        0.0
    };

    if wanted < 0.0 {
        let room = ((band.hi - energy) / (params.eta_c * interval_h)).max(0.0);
        -(-wanted).min(room)
    } else if wanted > 0.0 {
        let room = ((energy - band.lo) * params.eta_d / interval_h).max(0.0);
        wanted.min(room)
    } else {
        0.0
    }
}
