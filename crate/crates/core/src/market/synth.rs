use chrono::{DateTime, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    FcrPriceSeries, FrequencyTrace, ImbalancePriceSeries, MINUTES_PER_QUARTER, QUARTERS_PER_BLOCK,
};
use crate::error::{Error, Result};

// Independent RNG streams per generated series.
const STREAM_FREQUENCY: u64 = 1;
const STREAM_SETTLEMENT: u64 = 2;
const STREAM_INDICATOR: u64 = 3;
const STREAM_FCR: u64 = 4;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Ornstein-Uhlenbeck parameters for the frequency deviation, 1 s steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OuParams {
    /// Mean-reversion rate, 1/s.
    pub reversion_per_s: f64,
    /// Diffusion coefficient, mHz/sqrt(s).
    pub volatility: f64,
    /// Deviations are clamped to +/- this value, mHz.
    pub clamp_mhz: f64,
}

impl Default for OuParams {
    fn default() -> Self {
        // ~24.5 mHz stationary spread with a 5-minute correlation time.
        Self {
            reversion_per_s: 1.0 / 300.0,
            volatility: 2.0,
            clamp_mhz: 200.0,
        }
    }
}

impl OuParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.reversion_per_s > 0.0 && self.volatility >= 0.0 && self.clamp_mhz > 0.0)
            || !(self.reversion_per_s.is_finite() && self.volatility.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "OU parameters need positive reversion and clamp and non-negative volatility: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn stationary_std(&self) -> f64 {
        self.volatility / (2.0 * self.reversion_per_s).sqrt()
    }
}

/// Exact-discretisation OU path started from its stationary law.
pub fn synth_frequency(
    start: DateTime<Utc>,
    duration_s: usize,
    seed: u64,
    ou: &OuParams,
) -> Result<FrequencyTrace> {
    ou.validate()?;
    let mut r = rng(seed, STREAM_FREQUENCY);
    let decay = (-ou.reversion_per_s).exp();
    let step_std = ou.stationary_std() * (1.0 - decay * decay).sqrt();
    let mut x: f64 = ou.stationary_std() * r.sample::<f64, _>(StandardNormal);
    let mut deviations_mhz = Vec::with_capacity(duration_s);
    for _ in 0..duration_s {
        deviations_mhz.push(x.clamp(-ou.clamp_mhz, ou.clamp_mhz));
        let z: f64 = r.sample(StandardNormal);
        x = x * decay + step_std * z;
    }
    Ok(FrequencyTrace {
        start,
        deviations_mhz,
    })
}

/// Quarter-hour settlement price pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImbalanceProfile {
    Flat {
        price: f64,
    },
    /// Square wave: `low` for `half_period_quarters`, then `high`, repeating.
    Alternating {
        low: f64,
        high: f64,
        half_period_quarters: usize,
    },
    /// `base` everywhere except every `every_quarters`-th quarter, which is `spike`.
    Spiky {
        base: f64,
        spike: f64,
        every_quarters: usize,
    },
    /// AR(1) around a diurnal mean with occasional signed spikes.
    Stochastic {
        mean: f64,
        daily_amplitude: f64,
        std: f64,
        persistence: f64,
        spike_probability: f64,
        spike_size: f64,
    },
}

/// FCR clearing price pattern per 4-hour block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FcrProfile {
    Flat { price: f64 },
    /// `low` on even blocks, `high` on odd ones.
    Alternating { low: f64, high: f64 },
    /// Independent normal draws per block, floored at zero.
    Stochastic { mean: f64, std: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriceProfile {
    pub imbalance: ImbalanceProfile,
    pub fcr: FcrProfile,
    /// Std of the minute indicator around its quarter's settlement price.
    #[serde(default)]
    pub indicator_noise_std: f64,
}

impl Default for PriceProfile {
    fn default() -> Self {
        Self {
            imbalance: ImbalanceProfile::Stochastic {
                mean: 120.0,
                daily_amplitude: 60.0,
                std: 90.0,
                persistence: 0.7,
                spike_probability: 0.03,
                spike_size: 400.0,
            },
            fcr: FcrProfile::Stochastic {
                mean: 25.0,
                std: 12.0,
            },
            indicator_noise_std: 20.0,
        }
    }
}

impl PriceProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("price profile: {m}")));
        match self.imbalance {
            ImbalanceProfile::Alternating {
                half_period_quarters: 0,
                ..
            } => return bad("half_period_quarters must be >= 1"),
            ImbalanceProfile::Spiky {
                every_quarters: 0, ..
            } => return bad("every_quarters must be >= 1"),
            ImbalanceProfile::Stochastic {
                std,
                persistence,
                spike_probability,
                ..
            } => {
                if std < 0.0 || !(0.0..1.0).contains(&persistence) {
                    return bad("need std >= 0 and 0 <= persistence < 1");
                }
                if !(0.0..=1.0).contains(&spike_probability) {
                    return bad("spike_probability must lie in [0, 1]");
                }
            }
            _ => {}
        }
        match self.fcr {
            FcrProfile::Flat { price } if price < 0.0 => return bad("FCR price must be >= 0"),
            FcrProfile::Alternating { low, high } if low < 0.0 || high < 0.0 => {
                return bad("FCR prices must be >= 0")
            }
            FcrProfile::Stochastic { std, .. } if std < 0.0 => return bad("FCR std must be >= 0"),
            _ => {}
        }
        if !(self.indicator_noise_std >= 0.0) {
            return bad("indicator_noise_std must be >= 0");
        }
        Ok(())
    }
}

/// Settlement, indicator and FCR series covering `n_quarters` quarter-hours.
pub fn synth_prices(
    start: DateTime<Utc>,
    n_quarters: usize,
    seed: u64,
    profile: &PriceProfile,
) -> Result<(ImbalancePriceSeries, FcrPriceSeries)> {
    profile.validate()?;
    let settlement = settlement_prices(start, n_quarters, seed, &profile.imbalance);

    let mut noise = rng(seed, STREAM_INDICATOR);
    let minute_indicator = settlement
        .iter()
        .flat_map(|&p| std::iter::repeat_n(p, MINUTES_PER_QUARTER))
        .map(|p| {
            if profile.indicator_noise_std > 0.0 {
                let z: f64 = noise.sample(StandardNormal);
                p + profile.indicator_noise_std * z
            } else {
                p
            }
        })
        .collect();

    let n_blocks = n_quarters.div_ceil(QUARTERS_PER_BLOCK);
    let mut fr = rng(seed, STREAM_FCR);
    let fcr: Vec<f64> = (0..n_blocks)
        .map(|b| match profile.fcr {
            FcrProfile::Flat { price } => price,
            FcrProfile::Alternating { low, high } => {
                if b % 2 == 0 {
                    low
                } else {
                    high
                }
            }
            FcrProfile::Stochastic { mean, std } => {
                let z: f64 = fr.sample(StandardNormal);
                (mean + std * z).max(0.0)
            }
        })
        .collect();

    Ok((
        ImbalancePriceSeries::new(start, minute_indicator, settlement)?,
        FcrPriceSeries::new(start, fcr)?,
    ))
}

fn settlement_prices(
    start: DateTime<Utc>,
    n_quarters: usize,
    seed: u64,
    profile: &ImbalanceProfile,
) -> Vec<f64> {
    match *profile {
        ImbalanceProfile::Flat { price } => vec![price; n_quarters],
        ImbalanceProfile::Alternating {
            low,
            high,
            half_period_quarters,
        } => (0..n_quarters)
            .map(|q| {
                if (q / half_period_quarters) % 2 == 0 {
                    low
                } else {
                    high
                }
            })
            .collect(),
        ImbalanceProfile::Spiky {
            base,
            spike,
            every_quarters,
        } => (0..n_quarters)
            .map(|q| {
                if q % every_quarters == every_quarters - 1 {
                    spike
                } else {
                    base
                }
            })
            .collect(),
        ImbalanceProfile::Stochastic {
            mean,
            daily_amplitude,
            std,
            persistence,
            spike_probability,
            spike_size,
        } => {
            let mut r = rng(seed, STREAM_SETTLEMENT);
            let innovation = std * (1.0 - persistence * persistence).sqrt();
            let start_hour = start.hour() as f64 + start.minute() as f64 / 60.0;
            let mut anomaly: f64 = std * r.sample::<f64, _>(StandardNormal);
            (0..n_quarters)
                .map(|q| {
                    let hour = (start_hour + q as f64 * 0.25) % 24.0;
                    // evening peak around 19:00, trough in the early morning
                    let diurnal = daily_amplitude
                        * (2.0 * std::f64::consts::PI * (hour - 13.0) / 24.0).sin();
                    let z: f64 = r.sample(StandardNormal);
                    anomaly = persistence * anomaly + innovation * z;
                    let mut p = mean + diurnal + anomaly;
                    if r.random::<f64>() < spike_probability {
                        p += if r.random::<bool>() {
                            spike_size
                        } else {
                            -spike_size
                        };
                    }
                    p
                })
                .collect()
        }
    }
}
