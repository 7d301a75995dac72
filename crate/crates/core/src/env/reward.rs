//! Per-step reward: imbalance cash, SoE proximity and violation, cycle
//! budget excess, and the override penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SoeBand;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    /// EUR per equivalent cycle above the budget, charged every step.
    pub lambda_c: f64,
    /// Rolling 24 h cycle budget.
    pub c_max: f64,
    /// Band fraction below which the proximity penalty starts.
    pub soe_margin_threshold: f64,
    pub soe_margin_weight: f64,
    /// EUR per MWh of excursion outside the band.
    pub soe_violation_weight: f64,
    pub override_penalty: f64,
    pub gamma: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda_c: 500.0,
            c_max: 1.15,
            soe_margin_threshold: 0.1,
            soe_margin_weight: 1.0,
            soe_violation_weight: 100.0,
            override_penalty: 10.0,
            gamma: 0.995,
        }
    }
}

impl RewardConfig {
    /// All shaping terms off: the reward is the imbalance cash.
    pub fn cash_only() -> Self {
        Self {
            lambda_c: 0.0,
            soe_margin_weight: 0.0,
            soe_violation_weight: 0.0,
            override_penalty: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("lambda_c", self.lambda_c),
            ("c_max", self.c_max),
            ("soe_margin_threshold", self.soe_margin_threshold),
            ("soe_margin_weight", self.soe_margin_weight),
            ("soe_violation_weight", self.soe_violation_weight),
            ("override_penalty", self.override_penalty),
        ];
        for (name, w) in weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "reward.{name} must be finite and >= 0, got {w}"
                )));
            }
        }
        if self.c_max <= 0.0 {
            return Err(Error::InvalidParameter("reward.c_max must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!(
                "reward.gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardComponents {
    pub r_imb: f64,
    pub r_soe: f64,
    pub r_cycle: f64,
    pub r_override: f64,
}

impl RewardComponents {
    pub fn total(&self) -> f64 {
        self.r_imb + self.r_soe + self.r_cycle + self.r_override
    }

    pub fn add(&mut self, other: &Self) {
        self.r_imb += other.r_imb;
        self.r_soe += other.r_soe;
        self.r_cycle += other.r_cycle;
        self.r_override += other.r_override;
    }
}

/// Cycle budget term.
pub fn cycle_penalty(cycles: f64, cfg: &RewardConfig) -> f64 {
    -cfg.lambda_c * (cycles - cfg.c_max).max(0.0)
}

/// Proximity and violation term. `energy` is the end-of-step SoE and
/// `violation_depth` the deepest excursion during the step.
pub fn soe_penalty(energy: f64, band: &SoeBand, violation_depth: f64, cfg: &RewardConfig) -> f64 {
    let width = band.width();
    let distance = if width > 0.0 {
        ((energy - band.lo).min(band.hi - energy) / width).max(0.0)
    } else {
        0.0
    };
    -cfg.soe_margin_weight * (cfg.soe_margin_threshold - distance).max(0.0)
        - cfg.soe_violation_weight * violation_depth
}

pub fn compute_reward(
    cash: f64,
    energy: f64,
    band: &SoeBand,
    violation_depth: f64,
    cycles: f64,
    override_fired: bool,
    cfg: &RewardConfig,
) -> RewardComponents {
    RewardComponents {
        r_imb: cash,
        r_soe: soe_penalty(energy, band, violation_depth, cfg),
        r_cycle: cycle_penalty(cycles, cfg),
        r_override: if override_fired { -cfg.override_penalty } else { 0.0 },
    }
}
