//! Training loop with periodic greedy validation and best-snapshot retention.

use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::evaluate::evaluate;
use super::network::{clip_grad_norm, td_loss_and_grad, Adam, QNetwork};
use super::replay::{ReplayBuffer, Transition};
use super::{ddqn_target, select_action};
use crate::env::{EpisodeSpec, ImbalanceEnv, InitPolicy, N_ACTIONS, OBS_DIM};
use crate::error::{Error, Result};
use crate::market::Split;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Environment steps over which epsilon decays linearly.
    pub epsilon_decay_steps: usize,
    /// Environment steps between target-network copies.
    pub target_sync: usize,
    /// Environment steps between training events.
    pub train_every: usize,
    /// Gradient steps per training event.
    pub gradient_steps: usize,
    pub episodes: usize,
    pub replay_capacity: usize,
    /// Transitions collected before the first update.
    pub learning_starts: usize,
    /// Multiplies rewards before they enter the replay buffer.
    pub reward_scale: f64,
    pub huber_delta: f64,
    pub max_grad_norm: f64,
    /// Episodes between validation passes; the last episode is always validated.
    pub eval_every: usize,
    /// Start training episodes at a seeded uniform SoE instead of mid-band.
    pub random_init: bool,
    /// Set from the experiment seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            learning_rate: 3e-4,
            batch_size: 256,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 50_000,
            target_sync: 1000,
            train_every: 1,
            gradient_steps: 1,
            episodes: 200,
            replay_capacity: 200_000,
            learning_starts: 1000,
            reward_scale: 0.01,
            huber_delta: 1.0,
            max_grad_norm: 10.0,
            eval_every: 10,
            random_init: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::InvalidParameter(format!("train: {m}")));
        if self.hidden.contains(&0) {
            return err("hidden layer widths must be > 0".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return err(format!("learning_rate must be >= 0, got {}", self.learning_rate));
        }
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&e) {
                return err(format!("{name} must lie in [0, 1], got {e}"));
            }
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("target_sync", self.target_sync),
            ("train_every", self.train_every),
            ("gradient_steps", self.gradient_steps),
            ("episodes", self.episodes),
            ("replay_capacity", self.replay_capacity),
            ("eval_every", self.eval_every),
        ] {
            if v == 0 {
                return err(format!("{name} must be >= 1"));
            }
        }
        if self.batch_size > self.replay_capacity {
            return err("batch_size exceeds replay_capacity".into());
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return err("reward_scale must be > 0".into());
        }
        if !(self.huber_delta > 0.0 && self.max_grad_norm > 0.0) {
            return err("huber_delta and max_grad_norm must be > 0".into());
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![OBS_DIM];
        sizes.extend(&self.hidden);
        sizes.push(N_ACTIONS);
        sizes
    }

    pub fn epsilon(&self, step: usize) -> f64 {
        if step >= self.epsilon_decay_steps {
            return self.epsilon_end;
        }
        let frac = step as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub day: NaiveDate,
    pub steps: usize,
    pub epsilon: f64,
    pub total_reward: f64,
    pub r_imb: f64,
    pub r_soe: f64,
    pub r_cycle: f64,
    pub r_override: f64,
    pub profit: f64,
    pub fcr_revenue: f64,
    pub imbalance_profit: f64,
    pub cycles: f64,
    pub overrides: usize,
    pub violation_seconds: u64,
    pub updates: usize,
    pub mean_loss: Option<f64>,
    pub validation_profit: Option<f64>,
    pub best_validation_profit: Option<f64>,
}

pub fn write_log_csv(path: impl AsRef<Path>, log: &[EpisodeLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in log {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the highest validation profit.
    pub best: QNetwork,
    pub best_episode: usize,
    pub best_validation_profit: f64,
    pub last: QNetwork,
    pub initial: QNetwork,
    pub log: Vec<EpisodeLog>,
    pub total_steps: usize,
    pub validation_days: usize,
}

struct Learner {
    online: QNetwork,
    target: QNetwork,
    adam: Adam,
}

impl Learner {
    fn update(
        &mut self,
        replay: &ReplayBuffer,
        cfg: &TrainConfig,
        gamma: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        let idx = replay.sample_indices(cfg.batch_size, rng)?;
        let batch: Vec<&Transition> = idx.iter().map(|&i| replay.get(i)).collect();
        let targets = batch
            .iter()
            .map(|t| ddqn_target(t.reward, &t.next_obs, &t.next_mask, t.done, &self.online, &self.target, gamma))
            .collect::<Result<Vec<f64>>>()?;
        let inputs: Vec<&[f64]> = batch.iter().map(|t| t.obs.as_slice()).collect();
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let (loss, mut grad) = td_loss_and_grad(&self.online, &inputs, &actions, &targets, cfg.huber_delta);
        clip_grad_norm(&mut grad, cfg.max_grad_norm);
        self.adam.step(self.online.params_mut(), &grad);
        Ok(loss)
    }
}

/// Trains on the training-split days of `env` and keeps the parameters with
/// the best greedy profit over the validation-split days.
pub fn train(env: &mut ImbalanceEnv, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train_days = env.episode_days(Some(Split::Train));
    let val_days = env.episode_days(Some(Split::Validation));
    if train_days.is_empty() {
        return Err(Error::InvalidParameter("no training days with full episodes in the data".into()));
    }
    if val_days.is_empty() {
        return Err(Error::InvalidParameter("no validation days with full episodes in the data".into()));
    }
    let gamma = env.reward_config().gamma;
    let sizes = cfg.layer_sizes();
    let initial = QNetwork::new(&sizes, cfg.seed)?;
    let mut learner = Learner {
        online: initial.clone(),
        target: initial.clone(),
        adam: Adam::new(initial.n_params(), cfg.learning_rate),
    };
    let mut replay = ReplayBuffer::new(cfg.replay_capacity)?;
    let mut act_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    act_rng.set_stream(1);
    let mut sample_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    sample_rng.set_stream(2);
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order_rng.set_stream(3);

    let mut best: Option<(QNetwork, usize, f64)> = None;
    let mut log = Vec::with_capacity(cfg.episodes);
    let mut order: Vec<NaiveDate> = Vec::new();
    let mut step = 0usize;

    for episode in 0..cfg.episodes {
        if order.is_empty() {
            order = train_days.clone();
            order.shuffle(&mut order_rng);
            order.reverse();
        }
        let day = order.pop().expect("refilled above");
        let init = if cfg.random_init {
            InitPolicy::Uniform {
                seed: cfg.seed.wrapping_mul(1_000_003).wrapping_add(episode as u64),
            }
        } else {
            InitPolicy::MidBand
        };
        let mut obs = env.reset(&EpisodeSpec::day(day).in_split(Split::Train).with_init(init))?;
        let mut mask = env.mask();
        let (mut loss_sum, mut updates) = (0.0, 0usize);
        while !env.is_done() {
            let epsilon = cfg.epsilon(step);
            let action = select_action(&learner.online, &obs, &mask, epsilon, &mut act_rng)?;
            let out = env.step(action)?;
            replay.push(Transition {
                obs,
                action: action.index(),
                reward: out.total_reward * cfg.reward_scale,
                next_obs: out.observation,
                next_mask: out.mask,
                done: out.done,
            });
            step += 1;
            if replay.len() >= cfg.learning_starts.max(cfg.batch_size) && step.is_multiple_of(cfg.train_every) {
                for _ in 0..cfg.gradient_steps {
                    let loss = learner.update(&replay, cfg, gamma, &mut sample_rng)?;
                    if !loss.is_finite() {
                        return Err(Error::Diverged { episode, loss });
                    }
                    loss_sum += loss;
                    updates += 1;
                }
            }
            if step.is_multiple_of(cfg.target_sync) {
                learner.target = learner.online.clone();
            }
            obs = out.observation;
            mask = out.mask;
        }

        let s = *env.summary();
        let ledger = env.ledger();
        let mut row = EpisodeLog {
            episode,
            day,
            steps: s.steps,
            epsilon: cfg.epsilon(step),
            total_reward: s.total_reward,
            r_imb: s.reward.r_imb,
            r_soe: s.reward.r_soe,
            r_cycle: s.reward.r_cycle,
            r_override: s.reward.r_override,
            profit: ledger.total_profit(),
            fcr_revenue: ledger.fcr_revenue(),
            imbalance_profit: ledger.imbalance_cash(),
            cycles: s.discharged_energy / env.params().e_cap,
            overrides: s.overrides,
            violation_seconds: s.violation_seconds,
            updates,
            mean_loss: (updates > 0).then(|| loss_sum / updates as f64),
            validation_profit: None,
            best_validation_profit: best.as_ref().map(|b| b.2),
        };

        if (episode + 1) % cfg.eval_every == 0 || episode + 1 == cfg.episodes {
            let profit = evaluate(&learner.online, env, &val_days)?.total_profit();
            if best.as_ref().is_none_or(|b| profit > b.2) {
                best = Some((learner.online.clone(), episode, profit));
            }
            row.validation_profit = Some(profit);
            row.best_validation_profit = best.as_ref().map(|b| b.2);
        }
        log.push(row);
    }

    let (best_net, best_episode, best_profit) = best.expect("last episode is always validated");
    Ok(TrainOutcome {
        best: best_net,
        best_episode,
        best_validation_profit: best_profit,
        last: learner.online,
        initial,
        log,
        total_steps: step,
        validation_days: val_days.len(),
    })
}
