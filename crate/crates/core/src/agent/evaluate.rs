//! Greedy evaluation over whole days with per-day profit decomposition.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::QNetwork;
use super::select_action;
use crate::env::{Action, ActionMask, EpisodeSpec, ImbalanceEnv, Observation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub day: NaiveDate,
    pub total_profit: f64,
    pub fcr_revenue: f64,
    pub imbalance_profit: f64,
    /// Discharged energy over the episode in equivalent full cycles.
    pub cycles: f64,
    pub overrides: usize,
    pub violation_seconds: u64,
    pub boundary_violations: usize,
    pub total_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub days: Vec<DayMetrics>,
}

impl EvaluationReport {
    fn sum<T: std::iter::Sum<T>>(&self, f: impl Fn(&DayMetrics) -> T) -> T {
        self.days.iter().map(f).sum()
    }

    pub fn total_profit(&self) -> f64 {
        self.sum(|d| d.total_profit)
    }

    pub fn fcr_revenue(&self) -> f64 {
        self.sum(|d| d.fcr_revenue)
    }

    pub fn imbalance_profit(&self) -> f64 {
        self.sum(|d| d.imbalance_profit)
    }

    pub fn cycles(&self) -> f64 {
        self.sum(|d| d.cycles)
    }

    pub fn overrides(&self) -> usize {
        self.sum(|d| d.overrides)
    }

    pub fn violation_seconds(&self) -> u64 {
        self.sum(|d| d.violation_seconds)
    }

    pub fn boundary_violations(&self) -> usize {
        self.sum(|d| d.boundary_violations)
    }

    pub fn total_reward(&self) -> f64 {
        self.sum(|d| d.total_reward)
    }

    /// Per-day rows followed by a `total` row.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            w,
            "day,total_profit,fcr_revenue,imbalance_profit,cycles,overrides,violation_seconds,boundary_violations,total_reward"
        )?;
        for d in &self.days {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                d.day,
                d.total_profit,
                d.fcr_revenue,
                d.imbalance_profit,
                d.cycles,
                d.overrides,
                d.violation_seconds,
                d.boundary_violations,
                d.total_reward
            )?;
        }
        writeln!(
            w,
            "total,{},{},{},{},{},{},{},{}",
            self.total_profit(),
            self.fcr_revenue(),
            self.imbalance_profit(),
            self.cycles(),
            self.overrides(),
            self.violation_seconds(),
            self.boundary_violations(),
            self.total_reward()
        )?;
        w.flush()?;
        Ok(())
    }
}

/// Runs `policy` from mid-band on each day and collects the metrics.
pub fn evaluate_with<F>(env: &mut ImbalanceEnv, days: &[NaiveDate], mut policy: F) -> Result<EvaluationReport>
where
    F: FnMut(&Observation, &ActionMask, &ImbalanceEnv) -> Result<Action>,
{
    if days.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let mut out = Vec::with_capacity(days.len());
    for &day in days {
        let mut obs = env.reset(&EpisodeSpec::day(day))?;
        let mut mask = env.mask();
        while !env.is_done() {
            let a = policy(&obs, &mask, env)?;
            let step = env.step(a)?;
            obs = step.observation;
            mask = step.mask;
        }
        let ledger = env.ledger();
        let s = env.summary();
        out.push(DayMetrics {
            day,
            total_profit: ledger.total_profit(),
            fcr_revenue: ledger.fcr_revenue(),
            imbalance_profit: ledger.imbalance_cash(),
            cycles: s.discharged_energy / env.params().e_cap,
            overrides: s.overrides,
            violation_seconds: s.violation_seconds,
            boundary_violations: s.boundary_violations,
            total_reward: s.total_reward,
        });
    }
    Ok(EvaluationReport { days: out })
}

/// Greedy evaluation of a Q-network.
pub fn evaluate(net: &QNetwork, env: &mut ImbalanceEnv, days: &[NaiveDate]) -> Result<EvaluationReport> {
    // never drawn from at epsilon zero
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    evaluate_with(env, days, |obs, mask, _| select_action(net, obs, mask, 0.0, &mut rng))
}
