//! The one-second inner loop shared by the Monte-Carlo rollouts and the
//! learning environment: FCR activation, the corrective override, and the
//! energy bookkeeping for one control interval.

use super::battery::{decompose, BatteryParams, BatteryState};
use super::fcr::{fcr_activation, total_power, FcrConfig, SoeBand};
use crate::error::{Error, Result};

/// Length of one simulation sub-step.
pub const SUBSTEP_S: i64 = 1;
const SUBSTEP_H: f64 = SUBSTEP_S as f64 / 3600.0;

/// Corrective override: when the stored energy has been pushed outside the
/// band, replace the imbalance setpoint with the largest move back toward it.
///
/// Returns the setpoint to apply and whether the override fired.
#[inline]
pub fn apply_override(proposed: f64, energy: f64, band: &SoeBand, residual_mw: f64) -> (f64, bool) {
    if energy < band.lo {
        (-residual_mw, true)
    } else if energy > band.hi {
        (residual_mw, true)
    } else {
        (proposed, false)
    }
}

/// Per-second record, kept only when a trace is requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondRecord {
    pub p_fcr: f64,
    pub p_imb: f64,
    /// Stored energy at the end of the second.
    pub energy: f64,
}

/// Aggregates of one control interval.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntervalOutcome {
    pub requested_setpoint: f64,
    pub override_fired: bool,
    /// Sub-steps that started outside the band.
    pub violation_seconds: u32,
    /// Deepest excursion outside the band seen at any sub-step boundary, MWh.
    pub max_violation_depth: f64,
    /// Grid-side imbalance energy, MWh, positive = injected.
    pub imbalance_energy: f64,
    /// Grid-side FCR activation energy, MWh, positive = injected.
    pub fcr_energy: f64,
    /// Grid-side discharged energy feeding the cycle counter, MWh.
    pub discharged_energy: f64,
}

impl IntervalOutcome {
    /// Energy that enters the imbalance position.
    pub fn settled_energy(&self, cfg: &FcrConfig) -> f64 {
        if cfg.fcr_energy_settled {
            self.imbalance_energy + self.fcr_energy
        } else {
            self.imbalance_energy
        }
    }
}

/// Fixed inputs of an interval.
#[derive(Debug, Clone, Copy)]
pub struct IntervalContext<'a> {
    pub params: &'a BatteryParams,
    pub fcr: &'a FcrConfig,
    pub bid_mw: f64,
    pub band: SoeBand,
}

impl IntervalContext<'_> {
    pub fn residual_mw(&self) -> f64 {
        self.params.p_nom - self.bid_mw
    }
}

/// Runs one second per frequency sample with a constant imbalance setpoint.
///
/// Once the override fires, the corrective setpoint is held for the rest of
/// the interval.
pub fn run_interval(
    state: &mut BatteryState,
    setpoint: f64,
    deviations_mhz: &[f64],
    ctx: &IntervalContext<'_>,
    mut trace: Option<&mut Vec<SecondRecord>>,
) -> Result<IntervalOutcome> {
    let residual = ctx.residual_mw();
    if setpoint.abs() > residual * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::ConverterLimit {
            total: setpoint.abs() + ctx.bid_mw,
            p_nom: ctx.params.p_nom,
        });
    }
    let mut out = IntervalOutcome {
        requested_setpoint: setpoint,
        ..IntervalOutcome::default()
    };
    let mut p_imb = setpoint;
    for &dev in deviations_mhz {
        let depth = ctx.band.violation_depth(state.energy);
        if depth > 0.0 {
            out.violation_seconds += 1;
            out.max_violation_depth = out.max_violation_depth.max(depth);
            let (corrected, fired) = apply_override(p_imb, state.energy, &ctx.band, residual);
            p_imb = corrected;
            out.override_fired |= fired;
        }
        let p_fcr = fcr_activation(ctx.bid_mw, dev, ctx.fcr);
        let p_total = total_power(p_fcr, p_imb, ctx.params.p_nom)?;
        let (p_charge, p_discharge) = decompose(p_total);
        state.step(p_charge, p_discharge, SUBSTEP_S, ctx.params)?;

        out.imbalance_energy += p_imb * SUBSTEP_H;
        out.fcr_energy += p_fcr * SUBSTEP_H;
        out.discharged_energy += p_discharge * SUBSTEP_H;
        if let Some(t) = trace.as_deref_mut() {
            t.push(SecondRecord {
                p_fcr,
                p_imb,
                energy: state.energy,
            });
        }
    }
    out.max_violation_depth = out
        .max_violation_depth
        .max(ctx.band.violation_depth(state.energy));
    Ok(out)
}
