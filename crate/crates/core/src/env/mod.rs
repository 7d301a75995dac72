//! Stage two environment: one-minute imbalance decisions on top of a fixed
//! FCR bid schedule, with 60 one-second FCR sub-steps per decision.

pub mod mask;
pub mod observation;
pub mod reward;
pub mod toy;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use mask::{action_mask, projected_violation, Action, ActionMask, MaskInputs, N_ACTIONS};
pub use observation::{build_observation, Observation, ObservationInputs, FEATURE_NAMES, OBS_DIM};
pub use reward::{compute_reward, cycle_penalty, soe_penalty, RewardComponents, RewardConfig};

pub use crate::model::apply_override;

use crate::bidding::BidSchedule;
use crate::error::{Error, Result};
use crate::market::{
    format_timestamp, split_of, MarketDataset, Split, MINUTES_PER_BLOCK, MINUTES_PER_QUARTER,
};
use crate::model::{run_interval, soe_bounds, BatteryParams, BatteryState, FcrConfig, IntervalContext, SoeBand};
use crate::settlement::Ledger;

const MINUTE_H: f64 = 1.0 / 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Minutes before a block change during which the next block's band is
    /// also enforced by the mask.
    pub lookahead_min: usize,
    /// Default episode length.
    pub episode_min: usize,
    /// Price mapped to +-1 in the observation, EUR/MWh.
    pub price_scale: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            lookahead_min: 60,
            episode_min: 1440,
            price_scale: 500.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        check_length(self.episode_min)?;
        if self.lookahead_min > MINUTES_PER_BLOCK {
            return Err(Error::InvalidParameter(format!(
                "lookahead_min must be at most {MINUTES_PER_BLOCK}, got {}",
                self.lookahead_min
            )));
        }
        if !(self.price_scale.is_finite() && self.price_scale > 0.0) {
            return Err(Error::InvalidParameter("price_scale must be > 0".into()));
        }
        Ok(())
    }
}

fn check_length(minutes: usize) -> Result<()> {
    if minutes == 0 || !minutes.is_multiple_of(MINUTES_PER_QUARTER) {
        return Err(Error::InvalidParameter(format!(
            "episode length must be a positive multiple of {MINUTES_PER_QUARTER} minutes, got {minutes}"
        )));
    }
    Ok(())
}

/// Initial stored energy of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitPolicy {
    #[default]
    MidBand,
    Uniform { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeSpec {
    pub day: NaiveDate,
    /// Defaults to the environment's episode length.
    pub length_min: Option<usize>,
    /// When set, the day must belong to this split.
    pub split: Option<Split>,
    pub init: InitPolicy,
}

impl EpisodeSpec {
    pub fn day(day: NaiveDate) -> Self {
        Self {
            day,
            length_min: None,
            split: None,
            init: InitPolicy::MidBand,
        }
    }

    pub fn in_split(mut self, split: Split) -> Self {
        self.split = Some(split);
        self
    }

    pub fn with_init(mut self, init: InitPolicy) -> Self {
        self.init = init;
        self
    }

    pub fn with_length(mut self, minutes: usize) -> Self {
        self.length_min = Some(minutes);
        self
    }
}

/// Everything that happened in one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub time: DateTime<Utc>,
    pub action: Action,
    pub bid_mw: u32,
    pub setpoint_mw: f64,
    pub override_fired: bool,
    pub violation_seconds: u32,
    pub max_violation_depth: f64,
    pub energy_start: f64,
    pub energy_end: f64,
    /// Band that applied during the step.
    pub band: SoeBand,
    pub cycles: f64,
    pub indicator_price: f64,
    pub settled_energy: f64,
    pub fcr_energy: f64,
    pub discharged_energy: f64,
    /// Indicator-priced cash of the minute.
    pub proxy_cash: f64,
    /// True settlement minus the proxy, booked on the last minute of a quarter.
    pub correction: f64,
    pub reward: RewardComponents,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub mask: ActionMask,
    pub reward: RewardComponents,
    pub total_reward: f64,
    pub override_fired: bool,
    pub done: bool,
    pub info: StepInfo,
}

/// Running totals of the current episode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub steps: usize,
    pub reward: RewardComponents,
    pub total_reward: f64,
    pub discharged_energy: f64,
    pub overrides: usize,
    pub violation_seconds: u64,
    /// Minute boundaries with the SoE outside the band of the step.
    pub boundary_violations: usize,
    pub max_violation_depth: f64,
}

pub struct ImbalanceEnv {
    dataset: Arc<MarketDataset>,
    bids: Vec<Option<u32>>,
    bands: Vec<Option<SoeBand>>,
    params: BatteryParams,
    fcr: FcrConfig,
    reward_cfg: RewardConfig,
    cfg: EnvConfig,

    state: BatteryState,
    start: usize,
    end: usize,
    minute: usize,
    ledger: Ledger,
    quarter_energy: f64,
    quarter_proxy: f64,
    summary: EpisodeSummary,
    done: bool,
    trace: Option<Vec<StepInfo>>,
}

impl ImbalanceEnv {
    pub fn new(
        dataset: Arc<MarketDataset>,
        schedule: &BidSchedule,
        params: BatteryParams,
        fcr: FcrConfig,
        reward_cfg: RewardConfig,
        cfg: EnvConfig,
    ) -> Result<Self> {
        params.validate()?;
        fcr.validate()?;
        reward_cfg.validate()?;
        cfg.validate()?;
        schedule.validate(&params)?;
        let bids: Vec<Option<u32>> = (0..dataset.n_blocks())
            .map(|b| schedule.bid_at(dataset.block_time(b)))
            .collect();
        if bids.iter().all(Option::is_none) {
            return Err(Error::Misaligned(format!(
                "bid schedule starting {} covers no block of the data starting {}",
                schedule.start,
                dataset.start()
            )));
        }
        let bands = bids
            .iter()
            .map(|b| b.map(|b| soe_bounds(b, &fcr, &params)).transpose())
            .collect::<Result<_>>()?;
        let start_time = dataset.start();
        Ok(Self {
            dataset,
            bids,
            bands,
            params,
            fcr,
            reward_cfg,
            cfg,
            state: BatteryState::new(0.0),
            start: 0,
            end: 0,
            minute: 0,
            ledger: Ledger::new(start_time),
            quarter_energy: 0.0,
            quarter_proxy: 0.0,
            summary: EpisodeSummary::default(),
            done: true,
            trace: None,
        })
    }

    pub fn dataset(&self) -> &MarketDataset {
        &self.dataset
    }

    pub fn params(&self) -> &BatteryParams {
        &self.params
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward_cfg
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Keep a per-step trace from the next reset on.
    pub fn set_recording(&mut self, on: bool) {
        self.trace = on.then(Vec::new);
    }

    fn covered_end(&self, from: usize) -> usize {
        let first_block = from / MINUTES_PER_BLOCK;
        let blocks = self.bids[first_block..]
            .iter()
            .take_while(|b| b.is_some())
            .count();
        ((first_block + blocks) * MINUTES_PER_BLOCK).min(self.dataset.n_minutes())
    }

    /// Days on which a full-length episode can start, optionally restricted
    /// to one split.
    pub fn episode_days(&self, split: Option<Split>) -> Vec<NaiveDate> {
        let ds = &self.dataset;
        let first = ds.start().date_naive();
        let last = ds.minute_time(ds.n_minutes() - 1).date_naive();
        first
            .iter_days()
            .take_while(|d| *d <= last)
            .filter(|d| split.is_none_or(|s| split_of(*d) == s))
            .filter(|d| {
                ds.day_start_minute(*d).is_some_and(|m| {
                    self.bids[m / MINUTES_PER_BLOCK].is_some()
                        && self.covered_end(m) >= m + self.cfg.episode_min
                })
            })
            .collect()
    }

    pub fn reset(&mut self, spec: &EpisodeSpec) -> Result<Observation> {
        let length = spec.length_min.unwrap_or(self.cfg.episode_min);
        check_length(length)?;
        let actual = split_of(spec.day);
        if let Some(requested) = spec.split {
            if requested != actual {
                return Err(Error::DayNotInSplit {
                    day: spec.day,
                    requested: requested.to_string(),
                    actual: actual.to_string(),
                });
            }
        }
        let start = self
            .dataset
            .day_start_minute(spec.day)
            .filter(|m| self.bids[m / MINUTES_PER_BLOCK].is_some())
            .ok_or(Error::DayNotCovered(spec.day))?;
        let band = self.band(start);
        let energy = match spec.init {
            InitPolicy::MidBand => band.midpoint(),
            InitPolicy::Uniform { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                band.lo + band.width() * rng.random::<f64>()
            }
        };
        self.state = BatteryState::new(energy);
        self.start = start;
        self.end = (start + length).min(self.covered_end(start));
        self.minute = start;
        self.ledger = Ledger::new(self.dataset.minute_time(start));
        self.quarter_energy = 0.0;
        self.quarter_proxy = 0.0;
        self.summary = EpisodeSummary::default();
        self.done = false;
        if let Some(t) = self.trace.as_mut() {
            t.clear();
        }
        Ok(self.observation())
    }

    fn bid(&self, minute: usize) -> u32 {
        self.bids[minute / MINUTES_PER_BLOCK].expect("minute inside the covered range")
    }

    fn band(&self, minute: usize) -> SoeBand {
        self.bands[minute / MINUTES_PER_BLOCK].expect("minute inside the covered range")
    }

    /// Bid and band of the block after the one holding `minute`, if covered.
    fn next_block(&self, minute: usize) -> Option<(u32, SoeBand)> {
        let b = minute / MINUTES_PER_BLOCK + 1;
        match (self.bids.get(b), self.bands.get(b)) {
            (Some(Some(bid)), Some(Some(band))) => Some((*bid, *band)),
            _ => None,
        }
    }

    fn decision_minute(&self) -> usize {
        self.minute.min(self.end.saturating_sub(1))
    }

    pub fn energy(&self) -> f64 {
        self.state.energy
    }

    pub fn cycles(&self) -> f64 {
        self.state.cycles(&self.params)
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Steps taken in the current episode.
    pub fn elapsed(&self) -> usize {
        self.minute - self.start
    }

    pub fn episode_len(&self) -> usize {
        self.end - self.start
    }

    /// Band in force for the next decision.
    pub fn active_band(&self) -> SoeBand {
        self.band(self.decision_minute())
    }

    pub fn current_bid(&self) -> u32 {
        self.bid(self.decision_minute())
    }

    pub fn mask_inputs(&self) -> MaskInputs<'_> {
        let m = self.decision_minute();
        let bid = self.bid(m) as f64;
        let to_block = MINUTES_PER_BLOCK - m % MINUTES_PER_BLOCK;
        let upcoming = self
            .next_block(m)
            .filter(|_| to_block <= self.cfg.lookahead_min)
            .map(|(_, band)| band);
        MaskInputs {
            energy: self.state.energy,
            active: self.band(m),
            upcoming,
            bid_mw: bid,
            residual_mw: self.params.p_nom - bid,
            interval_h: MINUTE_H,
            params: &self.params,
        }
    }

    pub fn mask(&self) -> ActionMask {
        action_mask(&self.mask_inputs())
    }

    pub fn observation(&self) -> Observation {
        let m = self.decision_minute();
        let t = self.dataset.minute_time(m);
        let bid = self.bid(m);
        let active = self.band(m);
        let (next_bid, upcoming) = self.next_block(m).unwrap_or((bid, active));
        build_observation(
            &ObservationInputs {
                price: self.dataset.indicator()[m],
                minute_of_day: (t.hour() * 60 + t.minute()) as usize,
                month0: self.dataset.month0(m),
                energy: self.state.energy,
                cycles: self.cycles(),
                c_max: self.reward_cfg.c_max,
                active,
                upcoming,
                bid_mw: bid as f64,
                next_bid_mw: next_bid as f64,
                minutes_to_block: MINUTES_PER_BLOCK - m % MINUTES_PER_BLOCK,
            },
            &self.params,
            self.cfg.price_scale,
        )
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::InvalidParameter(
                "step called on a finished episode; call reset first".into(),
            ));
        }
        if !self.mask()[action.index()] {
            return Err(Error::InvalidParameter(format!(
                "action {} is masked",
                action.name()
            )));
        }
        let m = self.minute;
        let bid = self.bid(m);
        let band = self.band(m);
        let rel = m - self.start;
        if m.is_multiple_of(MINUTES_PER_BLOCK) {
            let block = m / MINUTES_PER_BLOCK;
            self.ledger
                .record_block(rel / MINUTES_PER_BLOCK, bid, self.dataset.fcr_prices()[block]);
        }

        let ctx = IntervalContext {
            params: &self.params,
            fcr: &self.fcr,
            bid_mw: bid as f64,
            band,
        };
        let setpoint = action.setpoint(ctx.residual_mw());
        let energy_start = self.state.energy;
        let out = run_interval(
            &mut self.state,
            setpoint,
            self.dataset.minute_deviations(m),
            &ctx,
            None,
        )?;

        let settled = out.settled_energy(&self.fcr);
        let price = self.dataset.indicator()[m];
        let proxy = settled * price;
        self.quarter_energy += settled;
        self.quarter_proxy += proxy;
        let mut correction = 0.0;
        if (m + 1).is_multiple_of(MINUTES_PER_QUARTER) {
            let settlement = self.dataset.settlement()[m / MINUTES_PER_QUARTER];
            let cash = self
                .ledger
                .record_quarter(rel / MINUTES_PER_QUARTER, self.quarter_energy, settlement);
            correction = cash - self.quarter_proxy;
            self.quarter_energy = 0.0;
            self.quarter_proxy = 0.0;
        }

        let cycles = self.cycles();
        let reward = compute_reward(
            proxy + correction,
            self.state.energy,
            &band,
            out.max_violation_depth,
            cycles,
            out.override_fired,
            &self.reward_cfg,
        );
        let total_reward = reward.total();

        let s = &mut self.summary;
        s.steps += 1;
        s.reward.add(&reward);
        s.total_reward += total_reward;
        s.discharged_energy += out.discharged_energy;
        s.overrides += out.override_fired as usize;
        s.violation_seconds += out.violation_seconds as u64;
        s.boundary_violations += !band.contains(self.state.energy) as usize;
        s.max_violation_depth = s.max_violation_depth.max(out.max_violation_depth);

        let info = StepInfo {
            time: self.dataset.minute_time(m),
            action,
            bid_mw: bid,
            setpoint_mw: setpoint,
            override_fired: out.override_fired,
            violation_seconds: out.violation_seconds,
            max_violation_depth: out.max_violation_depth,
            energy_start,
            energy_end: self.state.energy,
            band,
            cycles,
            indicator_price: price,
            settled_energy: settled,
            fcr_energy: out.fcr_energy,
            discharged_energy: out.discharged_energy,
            proxy_cash: proxy,
            correction,
            reward,
        };
        if let Some(t) = self.trace.as_mut() {
            t.push(info);
        }

        self.minute += 1;
        self.done = self.minute >= self.end;
        Ok(StepOutcome {
            observation: self.observation(),
            mask: if self.done { [true; N_ACTIONS] } else { self.mask() },
            reward,
            total_reward,
            override_fired: out.override_fired,
            done: self.done,
            info,
        })
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn summary(&self) -> &EpisodeSummary {
        &self.summary
    }

    pub fn trace(&self) -> Option<&[StepInfo]> {
        self.trace.as_deref()
    }

    /// Per-step trace as CSV; requires recording to be on.
    pub fn write_trace_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let trace = self
            .trace
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("trace recording is off".into()))?;
        write_trace_csv(path, trace)
    }
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[StepInfo]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        w,
        "timestamp,action,bid_mw,setpoint_mw,override,violation_seconds,energy_start_mwh,energy_end_mwh,band_lo,band_hi,cycles,indicator_price,settled_mwh,fcr_mwh,proxy_cash,correction,r_imb,r_soe,r_cycle,r_override,reward"
    )?;
    for s in trace {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            format_timestamp(s.time),
            s.action.name(),
            s.bid_mw,
            s.setpoint_mw,
            s.override_fired as u8,
            s.violation_seconds,
            s.energy_start,
            s.energy_end,
            s.band.lo,
            s.band.hi,
            s.cycles,
            s.indicator_price,
            s.settled_energy,
            s.fcr_energy,
            s.proxy_cash,
            s.correction,
            s.reward.r_imb,
            s.reward.r_soe,
            s.reward.r_cycle,
            s.reward.r_override,
            s.reward.total()
        )?;
    }
    w.flush()?;
    Ok(())
}
