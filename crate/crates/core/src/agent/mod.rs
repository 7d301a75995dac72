//! Masked double-DQN agent.

pub mod checkpoint;
pub mod evaluate;
pub mod network;
pub mod replay;
pub mod train;

use rand::Rng;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointMeta, CHECKPOINT_HEADER};
pub use evaluate::{evaluate, evaluate_with, DayMetrics, EvaluationReport};
pub use network::{clip_grad_norm, huber, huber_grad, td_loss_and_grad, Adam, QNetwork};
pub use replay::{ReplayBuffer, Transition};
pub use train::{train, write_log_csv, EpisodeLog, TrainConfig, TrainOutcome};

use crate::env::{Action, ActionMask};
use crate::error::{Error, Result};

/// Index of the largest allowed value; ties go to the lowest index.
pub fn masked_argmax(q: &[f64], mask: &ActionMask) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in q.iter().enumerate() {
        if mask[i] && best.is_none_or(|b| v > q[b]) {
            best = Some(i);
        }
    }
    best
}

/// Epsilon-greedy over the allowed actions. The random draw is skipped when
/// `epsilon` is zero.
pub fn select_action<R: Rng>(
    q: &QNetwork,
    obs: &[f64],
    mask: &ActionMask,
    epsilon: f64,
    rng: &mut R,
) -> Result<Action> {
    let allowed: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if allowed.is_empty() {
        return Err(Error::AllActionsMasked);
    }
    let index = if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        allowed[rng.random_range(0..allowed.len())]
    } else {
        masked_argmax(&q.forward(obs), mask).expect("non-empty mask")
    };
    Ok(Action::from_index(index).expect("action index"))
}

/// `r` when terminal, else `r + gamma * Q_target(s', a*)` with `a*` the
/// online network's best allowed action in `s'`.
pub fn ddqn_target(
    reward: f64,
    next_obs: &[f64],
    next_mask: &ActionMask,
    done: bool,
    online: &QNetwork,
    target: &QNetwork,
    gamma: f64,
) -> Result<f64> {
    if done {
        return Ok(reward);
    }
    let a = masked_argmax(&online.forward(next_obs), next_mask).ok_or(Error::AllActionsMasked)?;
    Ok(reward + gamma * target.forward(next_obs)[a])
}
