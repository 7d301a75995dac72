//! Battery physics, the FCR activation law and the SoE feasibility band.

pub mod battery;
pub mod dispatch;
pub mod fcr;

pub use battery::{
    cycle_throughput, decompose, soe_after, step_soe, BatteryParams, BatteryState,
    DischargeWindow, DEFAULT_CYCLE_HORIZON_MIN,
};
pub use dispatch::{apply_override, run_interval, IntervalContext, IntervalOutcome, SecondRecord};
pub use fcr::{
    candidate_bids, check_bid, fcr_activation, soe_bounds, total_power, FcrBid, FcrConfig, SoeBand,
};
