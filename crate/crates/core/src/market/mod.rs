//! Market time series: loading, alignment, the chronological split and
//! synthetic generators.

mod csv_io;
mod split;
mod synth;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Timelike, Utc};

use crate::error::{Error, Result};

pub use csv_io::{
    format_timestamp, load_fcr_csv, load_frequency_csv, load_imbalance_csv, parse_timestamp,
    write_fcr_csv, write_frequency_csv, write_imbalance_csv, FREQUENCY_GAP_LIMIT_S,
};
pub use split::{chronological_split, split_of, DatasetSplit, Split};
pub use synth::{
    synth_frequency, synth_prices, FcrProfile, ImbalanceProfile, OuParams, PriceProfile,
};

pub const SECONDS_PER_MINUTE: usize = 60;
pub const MINUTES_PER_QUARTER: usize = 15;
pub const QUARTERS_PER_BLOCK: usize = 16;
pub const MINUTES_PER_BLOCK: usize = MINUTES_PER_QUARTER * QUARTERS_PER_BLOCK;
pub const SECONDS_PER_BLOCK: usize = MINUTES_PER_BLOCK * SECONDS_PER_MINUTE;
pub const MINUTES_PER_DAY: usize = 1440;
pub const BLOCK_HOURS: u32 = 4;

/// 1 s frequency deviations from 50 Hz, in mHz.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTrace {
    pub start: DateTime<Utc>,
    pub deviations_mhz: Vec<f64>,
}

/// 1-minute price indicator plus the 15-minute settlement price, EUR/MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct ImbalancePriceSeries {
    pub start: DateTime<Utc>,
    pub minute_indicator: Vec<f64>,
    pub settlement: Vec<f64>,
}

impl ImbalancePriceSeries {
    pub fn new(
        start: DateTime<Utc>,
        minute_indicator: Vec<f64>,
        settlement: Vec<f64>,
    ) -> Result<Self> {
        if minute_indicator.len() != MINUTES_PER_QUARTER * settlement.len() {
            return Err(Error::Misaligned(format!(
                "{} indicator minutes for {} settlement quarters",
                minute_indicator.len(),
                settlement.len()
            )));
        }
        if minute_indicator
            .iter()
            .chain(&settlement)
            .any(|p| !p.is_finite())
        {
            return Err(Error::Misaligned("non-finite imbalance price".into()));
        }
        Ok(Self {
            start,
            minute_indicator,
            settlement,
        })
    }

    /// Indicator that repeats each settlement price for its 15 minutes.
    pub fn with_perfect_indicator(start: DateTime<Utc>, settlement: Vec<f64>) -> Self {
        let minute_indicator = settlement
            .iter()
            .flat_map(|&p| std::iter::repeat_n(p, MINUTES_PER_QUARTER))
            .collect();
        Self {
            start,
            minute_indicator,
            settlement,
        }
    }
}

/// FCR clearing prices, EUR/MW per 4-hour block.
#[derive(Debug, Clone, PartialEq)]
pub struct FcrPriceSeries {
    pub start: DateTime<Utc>,
    pub prices: Vec<f64>,
}

impl FcrPriceSeries {
    pub fn new(start: DateTime<Utc>, prices: Vec<f64>) -> Result<Self> {
        if let Some(p) = prices.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::Misaligned(format!(
                "FCR clearing price {p} is not a non-negative number"
            )));
        }
        Ok(Self { start, prices })
    }
}

pub fn is_block_boundary(t: DateTime<Utc>) -> bool {
    t.hour().is_multiple_of(BLOCK_HOURS) && t.minute() == 0 && t.second() == 0 && t.nanosecond() == 0
}

/// The four aligned inputs, trimmed to whole quarter-hours of common coverage.
///
/// Immutable once built; share it behind an `Arc` across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketDataset {
    start: DateTime<Utc>,
    deviations_mhz: Vec<f64>,
    indicator: Vec<f64>,
    settlement: Vec<f64>,
    fcr_prices: Vec<f64>,
}

impl MarketDataset {
    pub fn new(
        frequency: FrequencyTrace,
        imbalance: ImbalancePriceSeries,
        fcr: FcrPriceSeries,
    ) -> Result<Self> {
        let start = frequency.start;
        if imbalance.start != start || fcr.start != start {
            return Err(Error::Misaligned(format!(
                "series start at {}, {} and {}",
                frequency.start, imbalance.start, fcr.start
            )));
        }
        if !is_block_boundary(start) {
            return Err(Error::Misaligned(format!(
                "dataset start {start} is not on a 4-hour block boundary"
            )));
        }
        let quarters = (frequency.deviations_mhz.len() / (SECONDS_PER_MINUTE * MINUTES_PER_QUARTER))
            .min(imbalance.settlement.len())
            .min(fcr.prices.len() * QUARTERS_PER_BLOCK);
        if quarters == 0 {
            return Err(Error::Misaligned(
                "series share no complete quarter-hour".into(),
            ));
        }
        let minutes = quarters * MINUTES_PER_QUARTER;
        let mut deviations_mhz = frequency.deviations_mhz;
        deviations_mhz.truncate(minutes * SECONDS_PER_MINUTE);
        let mut indicator = imbalance.minute_indicator;
        indicator.truncate(minutes);
        let mut settlement = imbalance.settlement;
        settlement.truncate(quarters);
        let mut fcr_prices = fcr.prices;
        fcr_prices.truncate(quarters.div_ceil(QUARTERS_PER_BLOCK));
        Ok(Self {
            start,
            deviations_mhz,
            indicator,
            settlement,
            fcr_prices,
        })
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn n_quarters(&self) -> usize {
        self.settlement.len()
    }

    pub fn n_minutes(&self) -> usize {
        self.indicator.len()
    }

    pub fn n_seconds(&self) -> usize {
        self.deviations_mhz.len()
    }

    /// Blocks touched by the data, including a partial trailing one.
    pub fn n_blocks(&self) -> usize {
        self.fcr_prices.len()
    }

    pub fn has_partial_block(&self) -> bool {
        !self.n_quarters().is_multiple_of(QUARTERS_PER_BLOCK)
    }

    pub fn deviations(&self) -> &[f64] {
        &self.deviations_mhz
    }

    pub fn indicator(&self) -> &[f64] {
        &self.indicator
    }

    pub fn settlement(&self) -> &[f64] {
        &self.settlement
    }

    pub fn fcr_prices(&self) -> &[f64] {
        &self.fcr_prices
    }

    pub fn minute_time(&self, minute: usize) -> DateTime<Utc> {
        self.start + Duration::minutes(minute as i64)
    }

    pub fn quarter_time(&self, quarter: usize) -> DateTime<Utc> {
        self.minute_time(quarter * MINUTES_PER_QUARTER)
    }

    pub fn block_time(&self, block: usize) -> DateTime<Utc> {
        self.minute_time(block * MINUTES_PER_BLOCK)
    }

    /// Deviations for one minute of the dataset.
    pub fn minute_deviations(&self, minute: usize) -> &[f64] {
        &self.deviations_mhz[minute * SECONDS_PER_MINUTE..(minute + 1) * SECONDS_PER_MINUTE]
    }

    /// Read-only view of block `b`, possibly shorter than 4 h at the end.
    pub fn block(&self, b: usize) -> Result<BlockView<'_>> {
        if b >= self.n_blocks() {
            return Err(Error::Misaligned(format!(
                "block {b} outside dataset of {} blocks",
                self.n_blocks()
            )));
        }
        let q0 = b * QUARTERS_PER_BLOCK;
        let q1 = ((b + 1) * QUARTERS_PER_BLOCK).min(self.n_quarters());
        let m0 = q0 * MINUTES_PER_QUARTER;
        let m1 = q1 * MINUTES_PER_QUARTER;
        Ok(BlockView {
            index: b,
            start: self.block_time(b),
            deviations_mhz: &self.deviations_mhz[m0 * SECONDS_PER_MINUTE..m1 * SECONDS_PER_MINUTE],
            indicator: &self.indicator[m0..m1],
            settlement: &self.settlement[q0..q1],
            fcr_price: self.fcr_prices[b],
        })
    }

    /// Median settlement price of the block after `b`, or of `b` itself for
    /// the last block.
    pub fn next_block_median(&self, b: usize) -> Result<f64> {
        let target = if b + 1 < self.n_blocks() { b + 1 } else { b };
        Ok(median(self.block(target)?.settlement))
    }

    /// Calendar days fully covered by the data.
    pub fn full_days(&self) -> Vec<NaiveDate> {
        let last = self.minute_time(self.n_minutes()).date_naive();
        self.start
            .date_naive()
            .iter_days()
            .take_while(|d| *d <= last)
            .filter(|d| self.day_minutes(*d).is_some())
            .collect()
    }

    fn day_offset_minutes(&self, day: NaiveDate) -> i64 {
        let midnight = day.and_hms_opt(0, 0, 0).expect("midnight").and_utc();
        (midnight - self.start).num_minutes()
    }

    /// Minute range `[first, first + 1440)` of a fully covered day.
    pub fn day_minutes(&self, day: NaiveDate) -> Option<std::ops::Range<usize>> {
        let offset = self.day_offset_minutes(day);
        if offset < 0 {
            return None;
        }
        let first = offset as usize;
        let end = first + MINUTES_PER_DAY;
        (end <= self.n_minutes()).then_some(first..end)
    }

    /// First dataset minute of `day`, if its midnight lies inside the data.
    pub fn day_start_minute(&self, day: NaiveDate) -> Option<usize> {
        let offset = self.day_offset_minutes(day);
        (offset >= 0 && (offset as usize) < self.n_minutes()).then_some(offset as usize)
    }

    /// Month index (0 = January) of a dataset minute.
    pub fn month0(&self, minute: usize) -> u32 {
        self.minute_time(minute).month0()
    }
}

/// One block of aligned inputs.
#[derive(Debug, Clone, Copy)]
pub struct BlockView<'a> {
    pub index: usize,
    pub start: DateTime<Utc>,
    pub deviations_mhz: &'a [f64],
    pub indicator: &'a [f64],
    pub settlement: &'a [f64],
    pub fcr_price: f64,
}

impl BlockView<'_> {
    pub fn n_minutes(&self) -> usize {
        self.indicator.len()
    }

    pub fn is_complete(&self) -> bool {
        self.settlement.len() == QUARTERS_PER_BLOCK
    }

    /// Population standard deviation of the settlement prices.
    pub fn settlement_std(&self) -> f64 {
        std_dev(self.settlement)
    }
}

/// Median with the even-length midpoint convention. NaN for empty input.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Linear-interpolation percentile (`q` in 0..=100).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (q.clamp(0.0, 100.0) / 100.0) * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (rank - lo as f64)
}
