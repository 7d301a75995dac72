use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trailing horizon of the cycle counter, in minutes.
pub const DEFAULT_CYCLE_HORIZON_MIN: i64 = 1440;

const POWER_SLACK: f64 = 1e-9;

/// Physical constants of the storage asset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatteryParams {
    /// Nominal converter power, MW.
    pub p_nom: f64,
    /// Usable energy capacity, MWh.
    pub e_cap: f64,
    /// Charge efficiency, fraction of grid-side energy stored.
    pub eta_c: f64,
    /// Discharge efficiency, fraction of stored energy delivered to the grid.
    pub eta_d: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            p_nom: 10.0,
            e_cap: 20.0,
            eta_c: 0.9,
            eta_d: 0.9,
        }
    }
}

impl BatteryParams {
    pub fn new(p_nom: f64, e_cap: f64, eta_c: f64, eta_d: f64) -> Result<Self> {
        let params = Self {
            p_nom,
            e_cap,
            eta_c,
            eta_d,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.p_nom, self.e_cap, self.eta_c, self.eta_d]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "battery parameters must be finite".into(),
            ));
        }
        if self.p_nom <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "p_nom must be positive, got {}",
                self.p_nom
            )));
        }
        if self.e_cap <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "e_cap must be positive, got {}",
                self.e_cap
            )));
        }
        for (name, eta) in [("eta_c", self.eta_c), ("eta_d", self.eta_d)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 1], got {eta}"
                )));
            }
        }
        Ok(())
    }

    /// Largest admissible FCR bid in whole MW. The nominal rating itself is
    /// never offered so some power is always left for SoE management.
    pub fn max_bid(&self) -> u32 {
        (self.p_nom - 1.0).floor().max(0.0) as u32
    }

    /// Change of stored energy (MWh) for a signed grid-side power held for
    /// `dt_h` hours. Positive power discharges.
    #[inline]
    pub fn energy_delta(&self, p_total: f64, dt_h: f64) -> f64 {
        if p_total >= 0.0 {
            -p_total / self.eta_d * dt_h
        } else {
            -p_total * self.eta_c * dt_h
        }
    }
}

/// Splits a signed grid-side power (positive = injection) into the
/// non-negative `(charge, discharge)` pair.
#[inline]
pub fn decompose(p_total: f64) -> (f64, f64) {
    if p_total >= 0.0 {
        (0.0, p_total)
    } else {
        (-p_total, 0.0)
    }
}

fn check_powers(p_charge: f64, p_discharge: f64, params: &BatteryParams) -> Result<()> {
    let limit = params.p_nom * (1.0 + POWER_SLACK) + POWER_SLACK;
    for p in [p_charge, p_discharge] {
        if !(p >= 0.0 && p <= limit) {
            return Err(Error::PowerOutOfRange {
                power: p,
                p_nom: params.p_nom,
            });
        }
    }
    if p_charge > 0.0 && p_discharge > 0.0 {
        return Err(Error::SimultaneousChargeDischarge {
            charge: p_charge,
            discharge: p_discharge,
        });
    }
    Ok(())
}

/// Energy after holding the given charge/discharge powers for `dt_h` hours.
///
/// No clipping to `[0, e_cap]` happens here: leaving the physical range is a
/// controller fault that the safety layer has to see.
pub fn soe_after(
    energy: f64,
    p_charge: f64,
    p_discharge: f64,
    dt_h: f64,
    params: &BatteryParams,
) -> Result<f64> {
    check_powers(p_charge, p_discharge, params)?;
    Ok(energy + (params.eta_c * p_charge - p_discharge / params.eta_d) * dt_h)
}

/// Rolling record of discharged energy used to count equivalent full cycles.
///
/// Timestamps are simulation seconds. Entries older than `now - horizon` are
/// dropped on every push or advance.
#[derive(Debug, Clone, PartialEq)]
pub struct DischargeWindow {
    horizon_s: i64,
    now_s: i64,
    entries: VecDeque<(i64, f64)>,
    sum: f64,
}

impl Default for DischargeWindow {
    fn default() -> Self {
        Self::new(DEFAULT_CYCLE_HORIZON_MIN)
    }
}

impl DischargeWindow {
    pub fn new(horizon_min: i64) -> Self {
        assert!(horizon_min > 0, "cycle horizon must be positive");
        Self {
            horizon_s: horizon_min * 60,
            now_s: i64::MIN,
            entries: VecDeque::new(),
            sum: 0.0,
        }
    }

    pub fn horizon_min(&self) -> i64 {
        self.horizon_s / 60
    }

    pub fn now_s(&self) -> i64 {
        self.now_s
    }

    pub fn entries(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Records `energy` MWh discharged at `at_s` and moves the clock there.
    pub fn push(&mut self, at_s: i64, energy: f64) {
        debug_assert!(energy >= 0.0);
        self.advance(at_s);
        if energy > 0.0 {
            self.entries.push_back((at_s, energy));
            self.sum += energy;
        }
    }

    /// Moves the clock forward and expires entries that left the horizon.
    pub fn advance(&mut self, now_s: i64) {
        if now_s > self.now_s {
            self.now_s = now_s;
        }
        let cutoff = self.now_s.saturating_sub(self.horizon_s);
        while let Some(&(t, e)) = self.entries.front() {
            if t >= cutoff {
                break;
            }
            self.entries.pop_front();
            self.sum -= e;
        }
        if self.entries.is_empty() {
            self.sum = 0.0;
        }
    }

    /// Cached throughput in equivalent full cycles.
    pub fn throughput(&self, e_cap: f64) -> f64 {
        self.sum.max(0.0) / e_cap
    }
}

/// Equivalent full cycles discharged within the trailing horizon, summed
/// entry by entry.
pub fn cycle_throughput(window: &DischargeWindow, e_cap: f64) -> f64 {
    let cutoff = window.now_s.saturating_sub(window.horizon_s);
    window
        .entries()
        .filter(|&(t, _)| t >= cutoff && t <= window.now_s)
        .map(|(_, e)| e)
        .sum::<f64>()
        / e_cap
}

/// Stored energy plus the rolling discharge record.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryState {
    pub energy: f64,
    pub window: DischargeWindow,
    clock_s: i64,
}

impl BatteryState {
    pub fn new(energy: f64) -> Self {
        Self::with_window(energy, DischargeWindow::default())
    }

    pub fn with_window(energy: f64, window: DischargeWindow) -> Self {
        Self {
            energy,
            window,
            clock_s: 0,
        }
    }

    pub fn clock_s(&self) -> i64 {
        self.clock_s
    }

    /// Advances the state by `dt_s` seconds at the given powers.
    #[inline]
    pub fn step(
        &mut self,
        p_charge: f64,
        p_discharge: f64,
        dt_s: i64,
        params: &BatteryParams,
    ) -> Result<()> {
        let dt_h = dt_s as f64 / 3600.0;
        self.energy = soe_after(self.energy, p_charge, p_discharge, dt_h, params)?;
        if p_discharge > 0.0 {
            self.window.push(self.clock_s, p_discharge * dt_h);
        }
        self.clock_s += dt_s;
        self.window.advance(self.clock_s);
        Ok(())
    }

    /// Signed-power convenience around [`BatteryState::step`].
    #[inline]
    pub fn step_signed(&mut self, p_total: f64, dt_s: i64, params: &BatteryParams) -> Result<()> {
        let (c, d) = decompose(p_total);
        self.step(c, d, dt_s, params)
    }

    pub fn cycles(&self, params: &BatteryParams) -> f64 {
        self.window.throughput(params.e_cap)
    }
}

/// Value-semantics form of [`BatteryState::step`] with `dt` in hours.
pub fn step_soe(
    state: &BatteryState,
    p_charge: f64,
    p_discharge: f64,
    dt_h: f64,
    params: &BatteryParams,
) -> Result<BatteryState> {
    let mut next = state.clone();
    let dt_s = (dt_h * 3600.0).round() as i64;
    next.energy = soe_after(state.energy, p_charge, p_discharge, dt_h, params)?;
    if p_discharge > 0.0 {
        next.window.push(state.clock_s, p_discharge * dt_h);
    }
    next.clock_s += dt_s;
    next.window.advance(next.clock_s);
    Ok(next)
}
