//! Normalised state vector.

use crate::model::{BatteryParams, SoeBand};

pub const OBS_DIM: usize = 13;

pub type Observation = [f64; OBS_DIM];

pub const FEATURE_NAMES: [&str; OBS_DIM] = [
    "price",
    "quarter_of_day",
    "minute_in_quarter",
    "month",
    "soe",
    "cycle_ratio",
    "dist_active_lo",
    "dist_active_hi",
    "dist_upcoming_lo",
    "dist_upcoming_hi",
    "bid",
    "next_bid",
    "minutes_to_block",
];

/// Raw quantities behind one observation.
#[derive(Debug, Clone, Copy)]
pub struct ObservationInputs {
    pub price: f64,
    pub minute_of_day: usize,
    pub month0: u32,
    pub energy: f64,
    pub cycles: f64,
    pub c_max: f64,
    pub active: SoeBand,
    pub upcoming: SoeBand,
    pub bid_mw: f64,
    pub next_bid_mw: f64,
    /// Minutes left in the current block, 1..=240.
    pub minutes_to_block: usize,
}

pub fn build_observation(
    x: &ObservationInputs,
    params: &BatteryParams,
    price_scale: f64,
) -> Observation {
    let unit = |v: f64| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let signed = |v: f64| if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 };
    let e_cap = params.e_cap;
    [
        signed(x.price / price_scale),
        unit((x.minute_of_day / 15) as f64 / 95.0),
        unit((x.minute_of_day % 15) as f64 / 14.0),
        unit(x.month0 as f64 / 11.0),
        unit(x.energy / e_cap),
        unit(x.cycles / x.c_max / 2.0),
        signed((x.energy - x.active.lo) / e_cap),
        signed((x.active.hi - x.energy) / e_cap),
        signed((x.energy - x.upcoming.lo) / e_cap),
        signed((x.upcoming.hi - x.energy) / e_cap),
        unit(x.bid_mw / params.p_nom),
        unit(x.next_bid_mw / params.p_nom),
        unit(x.minutes_to_block as f64 / 240.0),
    ]
}
