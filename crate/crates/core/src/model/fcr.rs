use serde::{Deserialize, Serialize};

use super::battery::BatteryParams;
use crate::error::{Error, Result};

/// FCR product parameters and the droop law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FcrConfig {
    /// Minutes of full activation the SoE must cover in each direction.
    pub t_res_min: f64,
    /// Deviation at which the full bid is activated, mHz.
    pub full_activation_mhz: f64,
    /// Deviation below which nothing is activated, mHz.
    pub dead_band_mhz: f64,
    /// Settle FCR activation energy in the imbalance position too.
    pub fcr_energy_settled: bool,
}

impl Default for FcrConfig {
    fn default() -> Self {
        Self {
            t_res_min: 25.0,
            full_activation_mhz: 200.0,
            dead_band_mhz: 0.0,
            fcr_energy_settled: false,
        }
    }
}

impl FcrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_res_min > 0.0 && self.t_res_min.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_res_min must be positive, got {}",
                self.t_res_min
            )));
        }
        if !(self.dead_band_mhz >= 0.0 && self.full_activation_mhz > self.dead_band_mhz)
            || !self.full_activation_mhz.is_finite()
        {
            return Err(Error::InvalidParameter(format!(
                "need full_activation_mhz > dead_band_mhz >= 0, got {} and {}",
                self.full_activation_mhz, self.dead_band_mhz
            )));
        }
        Ok(())
    }

    pub fn t_res_h(&self) -> f64 {
        self.t_res_min / 60.0
    }

    /// Fraction of the bid to deliver for a deviation; + means inject.
    #[inline]
    pub fn activation_fraction(&self, deviation_mhz: f64) -> f64 {
        let magnitude = deviation_mhz.abs();
        if magnitude <= self.dead_band_mhz {
            return 0.0;
        }
        let frac = ((magnitude - self.dead_band_mhz)
            / (self.full_activation_mhz - self.dead_band_mhz))
            .min(1.0);
        if deviation_mhz < 0.0 {
            frac
        } else {
            -frac
        }
    }
}

/// A capacity commitment for one 4-hour block, in whole MW.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FcrBid {
    pub block_index: usize,
    pub power_mw: u32,
}

impl FcrBid {
    pub fn new(block_index: usize, power_mw: u32, params: &BatteryParams) -> Result<Self> {
        check_bid(power_mw, params)?;
        Ok(Self {
            block_index,
            power_mw,
        })
    }

    pub fn power(&self) -> f64 {
        self.power_mw as f64
    }

    pub fn bounds(&self, cfg: &FcrConfig, params: &BatteryParams) -> Result<SoeBand> {
        soe_bounds(self.power_mw, cfg, params)
    }
}

pub fn check_bid(power_mw: u32, params: &BatteryParams) -> Result<()> {
    let max = params.max_bid();
    if power_mw > max {
        return Err(Error::InvalidBid {
            bid: power_mw,
            max,
        });
    }
    Ok(())
}

/// Candidate bids in whole MW: `0..=p_nom - 1`.
pub fn candidate_bids(params: &BatteryParams) -> Vec<u32> {
    (0..=params.max_bid()).collect()
}

/// Admissible stored-energy interval, MWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoeBand {
    pub lo: f64,
    pub hi: f64,
}

impl SoeBand {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    #[inline]
    pub fn contains(&self, energy: f64) -> bool {
        energy >= self.lo && energy <= self.hi
    }

    /// How far (MWh) the energy lies outside the band; 0 inside.
    #[inline]
    pub fn violation_depth(&self, energy: f64) -> f64 {
        (self.lo - energy).max(0.0) + (energy - self.hi).max(0.0)
    }
}

/// Energy margin required by a bid: enough to deliver it for `t_res` in
/// either direction.
pub fn soe_bounds(bid_mw: u32, cfg: &FcrConfig, params: &BatteryParams) -> Result<SoeBand> {
    check_bid(bid_mw, params)?;
    let reserve = bid_mw as f64 * cfg.t_res_h();
    let band = SoeBand {
        lo: reserve,
        hi: params.e_cap - reserve,
    };
    if band.lo > band.hi {
        return Err(Error::InfeasibleMargin {
            bid: bid_mw,
            reserve,
            e_cap: params.e_cap,
        });
    }
    Ok(band)
}

/// Required FCR power for a frequency deviation. Under-frequency injects.
#[inline]
pub fn fcr_activation(bid_mw: f64, deviation_mhz: f64, cfg: &FcrConfig) -> f64 {
    bid_mw * cfg.activation_fraction(deviation_mhz)
}

/// Total grid-side injection of the FCR and imbalance components.
#[inline]
pub fn total_power(p_fcr: f64, p_imb: f64, p_nom: f64) -> Result<f64> {
    let total = p_fcr + p_imb;
    if total.abs() > p_nom * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::ConverterLimit { total, p_nom });
    }
    Ok(total)
}
