//! The experiment commands: synthesise data, optimise bids, train, evaluate.
//! Every command reads the same [`ExperimentConfig`] and writes into its
//! `out_dir`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agent::{
    evaluate_with, read_checkpoint, select_action, train, write_checkpoint, write_log_csv, CheckpointMeta,
    DayMetrics, EvaluationReport, QNetwork, TrainOutcome,
};
use crate::bidding::{
    evaluate_blocks, optimize_schedule, selected_stats, write_block_features_csv, write_candidates_csv,
    BidSchedule, BlockReport, RolloutContext,
};
use crate::config::ExperimentConfig;
use crate::env::{Action, ActionMask, ImbalanceEnv, Observation, FEATURE_NAMES, N_ACTIONS, OBS_DIM};
use crate::error::{Error, Result};
use crate::heuristic::PriceThresholds;
use crate::market::{
    load_fcr_csv, load_frequency_csv, load_imbalance_csv, split_of, synth_frequency, synth_prices,
    write_fcr_csv, write_frequency_csv, write_imbalance_csv, MarketDataset, Split, MINUTES_PER_DAY,
    MINUTES_PER_QUARTER,
};

pub const DATA_DIR: &str = "data";
pub const FREQUENCY_FILE: &str = "frequency.csv";
pub const SETTLEMENT_FILE: &str = "imbalance_settlement.csv";
pub const INDICATOR_FILE: &str = "imbalance_indicator.csv";
pub const FCR_FILE: &str = "fcr.csv";
pub const SCHEDULE_FILE: &str = "schedule.csv";
pub const CANDIDATES_FILE: &str = "candidates.csv";
pub const BLOCKS_FILE: &str = "blocks.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const CHECKPOINT_META_FILE: &str = "checkpoint.json";
pub const TRAINING_LOG_FILE: &str = "training_log.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACES_DIR: &str = "traces";

fn out_path(cfg: &ExperimentConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    Ok(cfg.out_dir.join(name))
}

type Series = (
    crate::market::FrequencyTrace,
    crate::market::ImbalancePriceSeries,
    crate::market::FcrPriceSeries,
);

fn synth_series(cfg: &ExperimentConfig) -> Result<Series> {
    let s = &cfg.synth;
    let quarters = s.days * MINUTES_PER_DAY / MINUTES_PER_QUARTER;
    let frequency = synth_frequency(s.start, quarters * MINUTES_PER_QUARTER * 60, cfg.seed, &s.frequency)?;
    let (imbalance, fcr) = synth_prices(s.start, quarters, cfg.seed, &s.prices)?;
    Ok((frequency, imbalance, fcr))
}

/// The configured synthetic dataset, in memory.
pub fn synthesize(cfg: &ExperimentConfig) -> Result<MarketDataset> {
    let (frequency, imbalance, fcr) = synth_series(cfg)?;
    MarketDataset::new(frequency, imbalance, fcr)
}

/// Writes the synthetic dataset to `<out_dir>/data/` and returns that directory.
pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let (frequency, imbalance, fcr) = synth_series(cfg)?;
    let dir = cfg.out_dir.join(DATA_DIR);
    std::fs::create_dir_all(&dir)?;
    write_frequency_csv(dir.join(FREQUENCY_FILE), &frequency)?;
    write_imbalance_csv(dir.join(SETTLEMENT_FILE), dir.join(INDICATOR_FILE), &imbalance)?;
    write_fcr_csv(dir.join(FCR_FILE), &fcr)?;
    Ok(dir)
}

pub fn load_dataset(dir: &Path) -> Result<MarketDataset> {
    let need = |name: &str| {
        let p = dir.join(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact {
                path: p,
                hint: "expected a data file".into(),
            })
        }
    };
    let indicator = dir.join(INDICATOR_FILE);
    let frequency = load_frequency_csv(need(FREQUENCY_FILE)?)?;
    let imbalance = load_imbalance_csv(need(SETTLEMENT_FILE)?, indicator.exists().then_some(indicator.as_path()))?;
    let fcr = load_fcr_csv(need(FCR_FILE)?)?;
    MarketDataset::new(frequency, imbalance, fcr)
}

/// `[data] dir`, else `<out_dir>/data/`, else the synthetic dataset.
pub fn resolve_dataset(cfg: &ExperimentConfig) -> Result<MarketDataset> {
    if let Some(dir) = &cfg.data.dir {
        return load_dataset(dir);
    }
    let local = cfg.out_dir.join(DATA_DIR);
    if local.join(FREQUENCY_FILE).exists() {
        return load_dataset(&local);
    }
    synthesize(cfg)
}

/// Heuristic trigger levels from the training-split indicator prices, or
/// from every price when the data holds no training day.
pub fn heuristic_thresholds(dataset: &MarketDataset, cfg: &ExperimentConfig) -> PriceThresholds {
    let train: Vec<f64> = (0..dataset.n_minutes())
        .filter(|&m| split_of(dataset.minute_time(m).date_naive()) == Split::Train)
        .map(|m| dataset.indicator()[m])
        .collect();
    let sample = if train.is_empty() { dataset.indicator() } else { &train };
    PriceThresholds::from_prices(sample, &cfg.heuristic)
}

#[derive(Debug, Clone)]
pub struct OptimizeOutput {
    pub schedule: BidSchedule,
    pub reports: Vec<BlockReport>,
}

/// Stage one. With `uniform`, every block gets that bid and only that
/// candidate is evaluated.
pub fn cmd_optimize_bids(cfg: &ExperimentConfig, uniform: Option<u32>) -> Result<OptimizeOutput> {
    cfg.validate()?;
    let dataset = resolve_dataset(cfg)?;
    let thresholds = heuristic_thresholds(&dataset, cfg);
    let ctx = RolloutContext {
        params: &cfg.battery,
        fcr: &cfg.fcr,
        heuristic: &cfg.heuristic,
        thresholds: &thresholds,
    };
    let (schedule, reports) = match uniform {
        None => optimize_schedule(&dataset, &cfg.monte_carlo, &ctx)?,
        Some(bid) => {
            crate::model::check_bid(bid, &cfg.battery)?;
            let reports = evaluate_blocks(&dataset, &[bid], &cfg.monte_carlo, &ctx)?;
            (BidSchedule::uniform(dataset.start(), dataset.n_blocks(), bid), reports)
        }
    };
    schedule.write_csv(out_path(cfg, SCHEDULE_FILE)?, Some(&selected_stats(&reports)))?;
    write_candidates_csv(out_path(cfg, CANDIDATES_FILE)?, &reports)?;
    write_block_features_csv(out_path(cfg, BLOCKS_FILE)?, &reports)?;
    Ok(OptimizeOutput { schedule, reports })
}

/// `--schedule`, else `<out_dir>/schedule.csv`.
pub fn resolve_schedule(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<BidSchedule> {
    let p = path.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir.join(SCHEDULE_FILE));
    if !p.exists() {
        return Err(Error::MissingArtifact {
            path: p,
            hint: "run `optimize-bids` first or pass --schedule".into(),
        });
    }
    let schedule = BidSchedule::read_csv(&p)?;
    schedule.validate(&cfg.battery)?;
    Ok(schedule)
}

/// Environment over the configured data and schedule, or the toy market.
pub fn build_env(cfg: &ExperimentConfig, schedule_path: Option<&Path>) -> Result<(ImbalanceEnv, String)> {
    if let Some(toy) = &cfg.toy {
        return Ok((toy.environment()?, "toy".into()));
    }
    let schedule = resolve_schedule(cfg, schedule_path)?;
    let dataset = Arc::new(resolve_dataset(cfg)?);
    let label = strategy_label(&schedule);
    let env = ImbalanceEnv::new(dataset, &schedule, cfg.battery, cfg.fcr, cfg.reward, cfg.env)?;
    Ok((env, label))
}

pub fn strategy_label(schedule: &BidSchedule) -> String {
    match schedule.bids.first() {
        Some(b) if schedule.is_uniform() => format!("uniform-{b}"),
        _ => "non-uniform".into(),
    }
}

/// Stage two training; writes the best-validation checkpoint, its metadata
/// and the training log.
pub fn cmd_train(cfg: &ExperimentConfig, schedule_path: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (mut env, _) = build_env(cfg, schedule_path)?;
    let outcome = train(&mut env, &cfg.train)?;
    write_checkpoint(&outcome.best, out_path(cfg, CHECKPOINT_FILE)?)?;
    CheckpointMeta {
        format: crate::agent::CHECKPOINT_HEADER.into(),
        layer_sizes: outcome.best.sizes().to_vec(),
        n_params: outcome.best.n_params(),
        features: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        actions: Action::ALL.iter().map(|a| a.name().to_string()).collect(),
        seed: cfg.train.seed,
        episodes: cfg.train.episodes,
        total_steps: outcome.total_steps,
        best_episode: Some(outcome.best_episode),
        best_validation_profit: Some(outcome.best_validation_profit),
        validation_days: outcome.validation_days,
    }
    .write(out_path(cfg, CHECKPOINT_META_FILE)?)?;
    write_log_csv(out_path(cfg, TRAINING_LOG_FILE)?, &outcome.log)?;
    Ok(outcome)
}

/// Aggregate results of one evaluated run, read back by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: String,
    pub split: Split,
    pub days: usize,
    pub fcr_revenue: f64,
    pub imbalance_profit: f64,
    /// Always `fcr_revenue + imbalance_profit`.
    pub total_profit: f64,
    pub cycles: f64,
    pub overrides: usize,
    pub violation_seconds: u64,
    pub boundary_violations: usize,
}

impl RunSummary {
    pub fn from_report(strategy: String, split: Split, report: &EvaluationReport) -> Self {
        let fcr_revenue = report.fcr_revenue();
        let imbalance_profit = report.imbalance_profit();
        Self {
            strategy,
            split,
            days: report.days.len(),
            fcr_revenue,
            imbalance_profit,
            total_profit: fcr_revenue + imbalance_profit,
            cycles: report.cycles(),
            overrides: report.overrides(),
            violation_seconds: report.violation_seconds(),
            boundary_violations: report.boundary_violations(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

fn check_compatible(net: &QNetwork) -> Result<()> {
    if net.input_dim() != OBS_DIM || net.output_dim() != N_ACTIONS {
        return Err(Error::Checkpoint(format!(
            "network maps {} inputs to {} outputs; the environment needs {OBS_DIM} -> {N_ACTIONS}",
            net.input_dim(),
            net.output_dim()
        )));
    }
    Ok(())
}

/// Greedy evaluation on the configured split; writes per-day metrics and the
/// run summary.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    schedule_path: Option<&Path>,
    checkpoint_path: Option<&Path>,
) -> Result<RunSummary> {
    cfg.validate()?;
    let ckpt = checkpoint_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.out_dir.join(CHECKPOINT_FILE));
    if !ckpt.exists() {
        return Err(Error::MissingArtifact {
            path: ckpt,
            hint: "run `train` first or pass --checkpoint".into(),
        });
    }
    let net = read_checkpoint(&ckpt)?;
    check_compatible(&net)?;
    let (mut env, label) = build_env(cfg, schedule_path)?;
    let split = cfg.evaluate.split;
    let days = env.episode_days(Some(split));
    if days.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "the data holds no full {split} day to evaluate"
        )));
    }
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let mut policy = |obs: &Observation, mask: &ActionMask, _: &ImbalanceEnv| select_action(&net, obs, mask, 0.0, &mut rng);
    let report = if cfg.evaluate.write_traces {
        let dir = out_path(cfg, TRACES_DIR)?;
        std::fs::create_dir_all(&dir)?;
        env.set_recording(true);
        let mut all: Vec<DayMetrics> = Vec::with_capacity(days.len());
        for day in &days {
            all.extend(evaluate_with(&mut env, &[*day], &mut policy)?.days);
            env.write_trace_csv(dir.join(format!("{day}.csv")))?;
        }
        EvaluationReport { days: all }
    } else {
        evaluate_with(&mut env, &days, &mut policy)?
    };
    report.write_csv(out_path(cfg, METRICS_FILE)?)?;
    let summary = RunSummary::from_report(label, split, &report);
    summary.write(out_path(cfg, SUMMARY_FILE)?)?;
    Ok(summary)
}
