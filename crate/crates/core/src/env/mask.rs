//! Pre-decision action filter based on a worst-case one-interval projection.

use crate::model::{BatteryParams, SoeBand};

pub const N_ACTIONS: usize = 3;

/// Discrete imbalance actions at full residual power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Charge = 0,
    Idle = 1,
    Discharge = 2,
}

impl Action {
    pub const ALL: [Action; N_ACTIONS] = [Action::Charge, Action::Idle, Action::Discharge];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Imbalance setpoint in MW (+ = inject).
    pub fn setpoint(self, residual_mw: f64) -> f64 {
        match self {
            Action::Charge => -residual_mw,
            Action::Idle => 0.0,
            Action::Discharge => residual_mw,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Charge => "charge",
            Action::Idle => "idle",
            Action::Discharge => "discharge",
        }
    }
}

pub type ActionMask = [bool; N_ACTIONS];

/// Inputs of the mask for one decision.
#[derive(Debug, Clone, Copy)]
pub struct MaskInputs<'a> {
    pub energy: f64,
    pub active: SoeBand,
    /// Band of the next block, set only inside the lookahead window.
    pub upcoming: Option<SoeBand>,
    pub bid_mw: f64,
    pub residual_mw: f64,
    pub interval_h: f64,
    pub params: &'a BatteryParams,
}

/// Worst-case violation depths `(active, upcoming)` of one action: the
/// action's own setpoint held for the interval together with full FCR
/// activation in the adverse direction for each bound.
pub fn projected_violation(action: Action, m: &MaskInputs<'_>) -> (f64, f64) {
    let p = action.setpoint(m.residual_mw);
    let low = m.energy + m.params.energy_delta(p + m.bid_mw, m.interval_h);
    let high = m.energy + m.params.energy_delta(p - m.bid_mw, m.interval_h);
    let depth = |band: &SoeBand| band.violation_depth(low).max(band.violation_depth(high));
    (depth(&m.active), m.upcoming.as_ref().map_or(0.0, depth))
}

/// `true` = allowed. Never returns an all-false mask: if every action
/// violates, only the least-violating one stays (active band first, then the
/// upcoming band; idle wins ties, then the lower index).
pub fn action_mask(m: &MaskInputs<'_>) -> ActionMask {
    let depths = Action::ALL.map(|a| projected_violation(a, m));
    let mask = depths.map(|(a, u)| a <= 0.0 && u <= 0.0);
    if mask.iter().any(|&ok| ok) {
        return mask;
    }
    let order = [Action::Idle, Action::Charge, Action::Discharge];
    let best = order
        .into_iter()
        .reduce(|best, a| {
            let (da, db) = (depths[a.index()], depths[best.index()]);
            if da.0 < db.0 || (da.0 == db.0 && da.1 < db.1) {
                a
            } else {
                best
            }
        })
        .expect("three actions");
    let mut only = [false; N_ACTIONS];
    only[best.index()] = true;
    only
}
