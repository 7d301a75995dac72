//! Stage one: per-block FCR bid selection by Monte-Carlo rollouts of the
//! heuristic controller over realised (ex post) block data.

use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristic::{heuristic_action, HeuristicConfig, PriceThresholds};
use crate::market::{
    format_timestamp, parse_timestamp, BlockView, MarketDataset, MINUTES_PER_QUARTER,
    SECONDS_PER_MINUTE,
};
use crate::model::{
    candidate_bids, run_interval, soe_bounds, BatteryParams, BatteryState, FcrConfig,
    IntervalContext, SecondRecord,
};
use crate::settlement::{fcr_capacity_revenue, settle_quarter_hour, BlockEvaluation};

const CONTROL_INTERVAL_H: f64 = 1.0 / 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloPlan {
    pub n_draws: usize,
    /// Always include both band edges among the draws.
    pub include_boundaries: bool,
    /// Only used for the jittered draws when boundaries are off.
    pub seed: u64,
}

impl Default for MonteCarloPlan {
    fn default() -> Self {
        Self {
            n_draws: 50,
            include_boundaries: true,
            seed: 0,
        }
    }
}

impl MonteCarloPlan {
    pub fn validate(&self) -> Result<()> {
        let min = if self.include_boundaries { 2 } else { 1 };
        if self.n_draws < min {
            return Err(Error::InvalidParameter(format!(
                "n_draws must be at least {min}, got {}",
                self.n_draws
            )));
        }
        Ok(())
    }
}

/// Initial energies for the rollouts of one candidate bid.
///
/// With boundaries on: `lo`, `hi` and evenly spaced points between them.
/// Otherwise one jittered point per equal-width stratum, seeded by
/// `(plan.seed, bid)`.
pub fn draw_initial_soe(
    bid_mw: u32,
    plan: &MonteCarloPlan,
    params: &BatteryParams,
    cfg: &FcrConfig,
) -> Result<Vec<f64>> {
    plan.validate()?;
    let band = soe_bounds(bid_mw, cfg, params)?;
    let n = plan.n_draws;
    if plan.include_boundaries {
        let step = band.width() / (n - 1) as f64;
        let mut draws: Vec<f64> = (0..n).map(|i| band.lo + step * i as f64).collect();
        draws[n - 1] = band.hi;
        Ok(draws)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        rng.set_stream(bid_mw as u64);
        let width = band.width() / n as f64;
        Ok((0..n)
            .map(|i| band.lo + width * (i as f64 + rng.random::<f64>()))
            .collect())
    }
}

/// Everything a rollout needs besides the block data.
#[derive(Debug, Clone, Copy)]
pub struct RolloutContext<'a> {
    pub params: &'a BatteryParams,
    pub fcr: &'a FcrConfig,
    pub heuristic: &'a HeuristicConfig,
    pub thresholds: &'a PriceThresholds,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockOutcome {
    pub evaluation: BlockEvaluation,
    pub violation_seconds: u32,
    pub overrides: u32,
    pub end_energy: f64,
}

fn check_view(block: &BlockView<'_>) -> Result<()> {
    let minutes = block.indicator.len();
    if minutes == 0
        || block.deviations_mhz.len() != minutes * SECONDS_PER_MINUTE
        || minutes != block.settlement.len() * MINUTES_PER_QUARTER
    {
        return Err(Error::Misaligned(format!(
            "block {}: {} s of frequency, {} indicator minutes, {} settlement quarters",
            block.index,
            block.deviations_mhz.len(),
            minutes,
            block.settlement.len()
        )));
    }
    Ok(())
}

/// One rollout of the heuristic controller over a block at 1 s resolution.
pub fn simulate_block(
    bid_mw: u32,
    initial_soe: f64,
    block: &BlockView<'_>,
    pi_bar_next: f64,
    ctx: &RolloutContext<'_>,
    mut trace: Option<&mut Vec<SecondRecord>>,
) -> Result<BlockOutcome> {
    check_view(block)?;
    let band = soe_bounds(bid_mw, ctx.fcr, ctx.params)?;
    let interval = IntervalContext {
        params: ctx.params,
        fcr: ctx.fcr,
        bid_mw: bid_mw as f64,
        band,
    };
    let residual = interval.residual_mw();
    let mut state = BatteryState::new(initial_soe);
    let mut quarter_energy = 0.0;
    let mut pi_imb = 0.0;
    let mut violation_seconds = 0;
    let mut overrides = 0;

    for (minute, &price) in block.indicator.iter().enumerate() {
        let setpoint = heuristic_action(
            state.energy,
            &band,
            price,
            ctx.thresholds,
            residual,
            CONTROL_INTERVAL_H,
            ctx.params,
            ctx.heuristic,
        );
        let seconds =
            &block.deviations_mhz[minute * SECONDS_PER_MINUTE..(minute + 1) * SECONDS_PER_MINUTE];
        let out = run_interval(&mut state, setpoint, seconds, &interval, trace.as_deref_mut())?;
        violation_seconds += out.violation_seconds;
        overrides += out.override_fired as u32;
        quarter_energy += out.settled_energy(ctx.fcr);
        if (minute + 1) % MINUTES_PER_QUARTER == 0 {
            pi_imb += settle_quarter_hour(quarter_energy, block.settlement[minute / MINUTES_PER_QUARTER]);
            quarter_energy = 0.0;
        }
    }

    let r_fcr = fcr_capacity_revenue(bid_mw, block.fcr_price);
    Ok(BlockOutcome {
        evaluation: BlockEvaluation::new(r_fcr, pi_imb, state.energy - initial_soe, pi_bar_next),
        violation_seconds,
        overrides,
        end_energy: state.energy,
    })
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Summary of one candidate bid's rollouts in one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateStats {
    pub bid_mw: u32,
    pub n_draws: usize,
    pub mean_j_adj: f64,
    pub std_j_adj: f64,
    pub mean_r_fcr: f64,
    pub mean_pi_imb: f64,
    pub mean_delta_e: f64,
    pub violation_seconds: u64,
    pub overrides: u64,
}

impl CandidateStats {
    pub fn from_outcomes(bid_mw: u32, outcomes: &[BlockOutcome]) -> Self {
        let ev = || outcomes.iter().map(|o| o.evaluation);
        let (mean_j_adj, std_j_adj) = mean_std(ev().map(|e| e.j_adj));
        Self {
            bid_mw,
            n_draws: outcomes.len(),
            mean_j_adj,
            std_j_adj,
            mean_r_fcr: mean_std(ev().map(|e| e.r_fcr)).0,
            mean_pi_imb: mean_std(ev().map(|e| e.pi_imb)).0,
            mean_delta_e: mean_std(ev().map(|e| e.delta_e)).0,
            violation_seconds: outcomes.iter().map(|o| o.violation_seconds as u64).sum(),
            overrides: outcomes.iter().map(|o| o.overrides as u64).sum(),
        }
    }
}

/// Mean adjusted profit of a set of draws, summed in draw order.
pub fn mean_j_adj(evaluations: &[BlockEvaluation]) -> f64 {
    evaluations.iter().map(|e| e.j_adj).sum::<f64>() / evaluations.len() as f64
}

/// Bid with the highest mean adjusted profit; ties go to the lower bid.
pub fn select_bid(candidates: &[(u32, Vec<BlockEvaluation>)]) -> Result<u32> {
    let first = candidates.first().ok_or(Error::EmptyEvaluation)?;
    let n = first.1.len();
    if n == 0 {
        return Err(Error::EmptyEvaluation);
    }
    if let Some((bid, evs)) = candidates.iter().find(|(_, e)| e.len() != n) {
        return Err(Error::InvalidParameter(format!(
            "candidate {bid} has {} draws, expected {n}",
            evs.len()
        )));
    }
    let mut sorted: Vec<&(u32, Vec<BlockEvaluation>)> = candidates.iter().collect();
    sorted.sort_by_key(|(bid, _)| *bid);
    let mut best = (sorted[0].0, mean_j_adj(&sorted[0].1));
    for (bid, evs) in &sorted[1..] {
        let m = mean_j_adj(evs);
        if m > best.1 {
            best = (*bid, m);
        }
    }
    Ok(best.0)
}

/// One FCR bid per 4-hour block starting at `start`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BidSchedule {
    pub start: DateTime<Utc>,
    pub bids: Vec<u32>,
}

impl BidSchedule {
    pub fn uniform(start: DateTime<Utc>, n_blocks: usize, bid_mw: u32) -> Self {
        Self {
            start,
            bids: vec![bid_mw; n_blocks],
        }
    }

    pub fn validate(&self, params: &BatteryParams) -> Result<()> {
        if !crate::market::is_block_boundary(self.start) {
            return Err(Error::Misaligned(format!(
                "schedule start {} is not a block boundary",
                self.start
            )));
        }
        for &b in &self.bids {
            crate::model::check_bid(b, params)?;
        }
        Ok(())
    }

    pub fn is_uniform(&self) -> bool {
        self.bids.windows(2).all(|w| w[0] == w[1])
    }

    pub fn block_start(&self, k: usize) -> DateTime<Utc> {
        self.start + Duration::hours(4 * k as i64)
    }

    /// Bid in force at `t`, if the schedule covers it.
    pub fn bid_at(&self, t: DateTime<Utc>) -> Option<u32> {
        let offset = (t - self.start).num_seconds();
        if offset < 0 {
            return None;
        }
        self.bids.get((offset / (4 * 3600)) as usize).copied()
    }

    /// `block_start,bid_mw,mean_j_adj,std_j_adj`; statistics columns are left
    /// empty when not supplied.
    pub fn write_csv(&self, path: impl AsRef<Path>, stats: Option<&[(f64, f64)]>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "block_start,bid_mw,mean_j_adj,std_j_adj")?;
        for (k, bid) in self.bids.iter().enumerate() {
            let t = format_timestamp(self.block_start(k));
            match stats.and_then(|s| s.get(k)) {
                Some((m, s)) => writeln!(w, "{t},{bid},{m},{s}")?,
                None => writeln!(w, "{t},{bid},,")?,
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let err = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(path)?;
        let headers = reader.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| err(1, format!("missing `{name}` column")))
        };
        let (tc, bc) = (col("block_start")?, col("bid_mw")?);
        let mut start = None;
        let mut bids = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let ts = record.get(tc).unwrap_or_default();
            let t = parse_timestamp(ts)
                .ok_or_else(|| err(line, format!("unparseable block_start `{ts}`")))?;
            let start = *start.get_or_insert(t);
            let expected = start + Duration::hours(4 * bids.len() as i64);
            if t != expected {
                return Err(Error::MissingInterval {
                    path: path.to_path_buf(),
                    expected,
                    found: t,
                });
            }
            let raw = record.get(bc).unwrap_or_default();
            let bid: u32 = raw
                .parse()
                .map_err(|_| err(line, format!("bid_mw `{raw}` is not a whole number of MW")))?;
            bids.push(bid);
        }
        let start = start.ok_or_else(|| err(1, "empty schedule".into()))?;
        Ok(Self { start, bids })
    }
}

/// Stage-one report for one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub block: usize,
    pub start: DateTime<Utc>,
    pub fcr_price: f64,
    /// Population std of the block's settlement prices.
    pub settlement_std: f64,
    pub candidates: Vec<CandidateStats>,
    pub selected: u32,
}

impl BlockReport {
    pub fn selected_stats(&self) -> Option<&CandidateStats> {
        self.candidates.iter().find(|c| c.bid_mw == self.selected)
    }
}

/// Runs every draw of one candidate bid in one block.
pub fn evaluate_candidate(
    dataset: &MarketDataset,
    block: usize,
    bid_mw: u32,
    plan: &MonteCarloPlan,
    ctx: &RolloutContext<'_>,
) -> Result<Vec<BlockOutcome>> {
    let view = dataset.block(block)?;
    let pi_bar_next = dataset.next_block_median(block)?;
    draw_initial_soe(bid_mw, plan, ctx.params, ctx.fcr)?
        .into_iter()
        .map(|e0| simulate_block(bid_mw, e0, &view, pi_bar_next, ctx, None))
        .collect()
}

/// Evaluates `bids` in every block and returns the per-block reports, with
/// the best candidate marked as selected.
pub fn evaluate_blocks(
    dataset: &MarketDataset,
    bids: &[u32],
    plan: &MonteCarloPlan,
    ctx: &RolloutContext<'_>,
) -> Result<Vec<BlockReport>> {
    plan.validate()?;
    if dataset.has_partial_block() {
        return Err(Error::PartialBlock {
            quarters: dataset.n_quarters(),
        });
    }
    let feasible: Vec<u32> = bids
        .iter()
        .copied()
        .filter(|&b| soe_bounds(b, ctx.fcr, ctx.params).is_ok())
        .collect();
    if feasible.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let jobs: Vec<(usize, u32)> = (0..dataset.n_blocks())
        .flat_map(|b| feasible.iter().map(move |&bid| (b, bid)))
        .collect();
    let results: Vec<Vec<BlockOutcome>> = jobs
        .par_iter()
        .map(|&(b, bid)| evaluate_candidate(dataset, b, bid, plan, ctx))
        .collect::<Result<_>>()?;

    let mut reports = Vec::with_capacity(dataset.n_blocks());
    for (b, chunk) in results.chunks(feasible.len()).enumerate() {
        let per_candidate: Vec<(u32, Vec<BlockEvaluation>)> = feasible
            .iter()
            .zip(chunk)
            .map(|(&bid, outs)| (bid, outs.iter().map(|o| o.evaluation).collect()))
            .collect();
        let selected = select_bid(&per_candidate)?;
        let view = dataset.block(b)?;
        reports.push(BlockReport {
            block: b,
            start: view.start,
            fcr_price: view.fcr_price,
            settlement_std: view.settlement_std(),
            candidates: feasible
                .iter()
                .zip(chunk)
                .map(|(&bid, outs)| CandidateStats::from_outcomes(bid, outs))
                .collect(),
            selected,
        });
    }
    Ok(reports)
}

/// Full stage one over every candidate `0..=p_nom - 1`.
pub fn optimize_schedule(
    dataset: &MarketDataset,
    plan: &MonteCarloPlan,
    ctx: &RolloutContext<'_>,
) -> Result<(BidSchedule, Vec<BlockReport>)> {
    let reports = evaluate_blocks(dataset, &candidate_bids(ctx.params), plan, ctx)?;
    let schedule = BidSchedule {
        start: dataset.start(),
        bids: reports.iter().map(|r| r.selected).collect(),
    };
    Ok((schedule, reports))
}

/// `(mean, std)` of the selected candidate per block, for the schedule file.
pub fn selected_stats(reports: &[BlockReport]) -> Vec<(f64, f64)> {
    reports
        .iter()
        .map(|r| {
            r.selected_stats()
                .map_or((f64::NAN, f64::NAN), |s| (s.mean_j_adj, s.std_j_adj))
        })
        .collect()
}

/// Per-candidate statistics as CSV.
pub fn write_candidates_csv(path: impl AsRef<Path>, reports: &[BlockReport]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        w,
        "block_start,bid_mw,n_draws,mean_j_adj,std_j_adj,mean_r_fcr,mean_pi_imb,mean_delta_e,violation_seconds,overrides,selected"
    )?;
    for r in reports {
        for c in &r.candidates {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                format_timestamp(r.start),
                c.bid_mw,
                c.n_draws,
                c.mean_j_adj,
                c.std_j_adj,
                c.mean_r_fcr,
                c.mean_pi_imb,
                c.mean_delta_e,
                c.violation_seconds,
                c.overrides,
                (c.bid_mw == r.selected) as u8
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Block features used by the bid heat map: `block_start,fcr_price,imbalance_std,bid_mw`.
pub fn write_block_features_csv(path: impl AsRef<Path>, reports: &[BlockReport]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "block_start,fcr_price,imbalance_std,bid_mw")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{}",
            format_timestamp(r.start),
            r.fcr_price,
            r.settlement_std,
            r.selected
        )?;
    }
    w.flush()?;
    Ok(())
}
