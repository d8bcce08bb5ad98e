//! Deep Q-learning: epsilon-greedy collection, uniform replay, a hard-synced
//! target network and squared Bellman-error descent.

mod replay;
mod train;

pub use replay::{ReplayBuffer, Transition};
pub use train::{train, TrainOutcome, TrainingLog, TrainingLogRow, LOG_HEADER};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, ParameterSet, Sgd, Tape};
use crate::lang::LangError;
use crate::model::{greedy_action, ModelError, QNetwork};
use crate::world::WorldError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("not ready: replay holds {have} transitions, need {need}")]
    NotReady { have: usize, need: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error("training aborted at env step {step}: {source}")]
    Aborted {
        step: usize,
        /// Parameters after the last completed update.
        last_good: Box<ParameterSet>,
        source: Box<TrainError>,
    },
}

impl From<crate::autodiff::AutodiffError> for TrainError {
    fn from(e: crate::autodiff::AutodiffError) -> Self {
        TrainError::Model(e.into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    /// Heavy-ball momentum for the SGD step; 0 is plain gradient descent.
    pub momentum: f64,
    pub discount: f64,
    pub total_env_steps: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of `total_env_steps` over which ε decays linearly.
    pub epsilon_decay_fraction: f64,
    /// Gradient updates between target syncs.
    pub target_sync_every: usize,
    pub warmup_steps: usize,
    /// Environment steps between gradient updates.
    pub update_every: usize,
    pub max_episode_steps: usize,
    /// Environment steps between evaluations.
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Clamp for `max_a Q_target` inside Bellman targets.
    pub target_clip: Option<f64>,
    /// Compute per-sample gradients on the rayon pool.
    pub parallel: bool,
    pub rng_seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.70974e-4,
            momentum: 0.0,
            discount: 0.990022,
            total_env_steps: 300_000,
            replay_capacity: 50_000,
            batch_size: 32,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_fraction: 0.1,
            target_sync_every: 2_000,
            warmup_steps: 1_000,
            update_every: 1,
            max_episode_steps: 100,
            eval_every: 10_000,
            eval_episodes: 100,
            target_clip: None,
            parallel: true,
            rng_seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return err("discount must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return err("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return err("momentum must lie in [0, 1)");
        }
        for (name, v) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(TrainError::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return err("epsilon_decay_fraction must lie in [0, 1]");
        }
        for (name, v) in [
            ("replay_capacity", self.replay_capacity),
            ("batch_size", self.batch_size),
            ("target_sync_every", self.target_sync_every),
            ("update_every", self.update_every),
            ("max_episode_steps", self.max_episode_steps),
            ("eval_every", self.eval_every),
            ("eval_episodes", self.eval_episodes),
        ] {
            if v == 0 {
                return Err(TrainError::Config(format!("{name} must be positive")));
            }
        }
        if self.batch_size > self.replay_capacity {
            return err("batch_size exceeds replay_capacity");
        }
        if matches!(self.target_clip, Some(c) if !c.is_finite()) {
            return err("target_clip must be finite");
        }
        Ok(())
    }
}

/// Linear decay from `epsilon_start` to `epsilon_end` over the first
/// `epsilon_decay_fraction · total_env_steps` steps, constant afterwards.
pub fn epsilon_at(step: usize, config: &TrainingConfig) -> f64 {
    let decay = config.epsilon_decay_fraction * config.total_env_steps as f64;
    if decay <= 0.0 || step as f64 >= decay {
        return config.epsilon_end.clamp(0.0, 1.0);
    }
    let t = step as f64 / decay;
    (config.epsilon_start + t * (config.epsilon_end - config.epsilon_start)).clamp(0.0, 1.0)
}

/// Epsilon-greedy choice. The uniform draw always happens first, so the
/// random stream advances identically whatever `q` holds.
pub fn select_action(q: &[f64], epsilon: f64, rng: &mut impl Rng) -> usize {
    explore(q.len(), epsilon, rng).unwrap_or_else(|| greedy_action(q))
}

/// The exploration half of [`select_action`]: `Some(random action)` with
/// probability ε, `None` when the caller should act greedily. Lets callers
/// skip the forward pass on exploratory steps.
pub fn explore(num_actions: usize, epsilon: f64, rng: &mut impl Rng) -> Option<usize> {
    let u: f64 = rng.gen();
    (u < epsilon).then(|| rng.gen_range(0..num_actions))
}

/// `y = r` for terminal transitions, else `r + γ·max_a Q_target(o', a)`,
/// with the max optionally clamped to `[−clip, clip]`.
pub fn bellman_targets<O, N: QNetwork<O>>(
    net: &N,
    batch: &[&Transition<O>],
    target_params: &ParameterSet,
    discount: f64,
    clip: Option<f64>,
) -> Result<Vec<f64>, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::NotReady { have: 0, need: 1 });
    }
    batch
        .iter()
        .map(|t| {
            if t.done {
                return Ok(t.reward);
            }
            let q = net.q_eval(target_params, &t.next_observation)?;
            let mut m = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if let Some(c) = clip {
                m = m.clamp(-c, c);
            }
            Ok(bellman_target(t.reward, discount, m))
        })
        .collect()
}

/// One Bellman target from its parts.
pub fn bellman_target(reward: f64, discount: f64, max_next_q: f64) -> f64 {
    reward + discount * max_next_q
}

/// Gradient of `(y − Q(o, a))²` for one sample, plus the loss value.
fn sample_gradient<O, N: QNetwork<O>>(
    net: &N,
    params: &ParameterSet,
    t: &Transition<O>,
    y: f64,
) -> Result<(f64, Gradients), TrainError> {
    let mut tape = Tape::new(params);
    let q = net.q_forward(&mut tape, &t.observation)?;
    let qa = tape.index(q, t.action)?;
    let loss = tape.squared_error(qa, y);
    Ok((tape.value(loss)[0], tape.backward(loss)))
}

/// One descent step on the mean squared Bellman error of `batch`. Targets
/// come from `target_params` and receive no gradient. Per-sample gradients
/// are reduced in batch order, so the result does not depend on threading.
pub fn train_step<O: Sync + Send, N: QNetwork<O>>(
    net: &N,
    batch: &[&Transition<O>],
    params: &mut ParameterSet,
    target_params: &ParameterSet,
    optimizer: &mut Sgd,
    config: &TrainingConfig,
) -> Result<f64, TrainError> {
    let targets = bellman_targets(net, batch, target_params, config.discount, config.target_clip)?;
    let frozen: &ParameterSet = params;
    let per_sample: Vec<Result<(f64, Gradients), TrainError>> = if config.parallel {
        batch.par_iter().zip(targets.par_iter()).map(|(t, &y)| sample_gradient(net, frozen, t, y)).collect()
    } else {
        batch.iter().zip(&targets).map(|(t, &y)| sample_gradient(net, frozen, t, y)).collect()
    };
    let mut total = Gradients::new();
    let mut loss = 0.0;
    for r in per_sample {
        let (l, g) = r?;
        loss += l;
        total.add_assign(&g);
    }
    let inv = 1.0 / batch.len() as f64;
    total.scale(inv);
    params.zero_grad();
    params.accumulate(&total)?;
    optimizer.step(params)?;
    Ok(loss * inv)
}

/// `target ← params`, bit for bit.
pub fn sync_target(params: &ParameterSet, target: &mut ParameterSet) -> Result<(), TrainError> {
    target
        .copy_values_from(params)
        .map_err(|_| TrainError::Config("online and target networks have different architectures".into()))
}
