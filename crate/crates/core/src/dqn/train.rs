use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, RngCore};

use super::{epsilon_at, explore, sync_target, train_step, ReplayBuffer, TrainError, TrainingConfig, Transition};
use crate::autodiff::{ParameterSet, Sgd};
use crate::eval::{evaluate, summarize, EvalPlan, Policy};
use crate::lang::{Houses, InstructionDataset, LangError, Split};
use crate::model::{greedy_action, FollowNet, QNetwork};
use crate::seed;
use crate::world::{reset_episode, step, Action, EnvConfig, EpisodeState, Observation, RenderConfig};

pub const LOG_HEADER: &str = "step,avg_return,full_success,partial_success,no_progress,epsilon,loss";

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingLogRow {
    /// Environment steps completed when the evaluation ran.
    pub step: usize,
    pub avg_return: f64,
    pub full: f64,
    pub partial: f64,
    pub none: f64,
    pub epsilon: f64,
    /// Mean minibatch loss since the previous row; `None` before any update.
    pub loss: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<TrainingLogRow>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{LOG_HEADER}\n");
        for r in &self.rows {
            let loss = r.loss.map(|l| l.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{},{},{},{loss}", r.step, r.avg_return, r.full, r.partial, r.none, r.epsilon);
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), TrainError> {
        std::fs::write(path, self.to_csv()).map_err(|e| TrainError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ParameterSet,
    pub log: TrainingLog,
}

struct Live {
    instruction: usize,
    state: EpisodeState,
    observation: Arc<Observation>,
}

/// Runs DQN for `config.total_env_steps` environment steps on the train
/// split, evaluating greedily on the hold-out split at step 0, every
/// `eval_every` steps and at the end. Starts from `initial` when given,
/// otherwise from a seeded initialization.
pub fn train(
    net: &FollowNet,
    dataset: &InstructionDataset,
    houses: &Houses,
    render: &RenderConfig,
    config: &TrainingConfig,
    initial: Option<ParameterSet>,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let root = config.rng_seed;
    let mut params = match initial {
        Some(p) => p,
        None => net.init_params(seed::derive(root, seed::INIT))?,
    };
    let mut log = TrainingLog::default();
    if config.total_env_steps == 0 {
        return Ok(TrainOutcome { params, log });
    }
    let train_ids = dataset.indices(Split::Train);
    if train_ids.is_empty() {
        return Err(TrainError::Config("dataset has no train instructions".into()));
    }
    for &i in &train_ids {
        let h = &dataset.instructions()[i].house;
        if !houses.contains_key(h) {
            return Err(LangError::Validation(vec![format!("unknown house `{h}`")]).into());
        }
    }
    let env = EnvConfig { render: *render, max_episode_steps: config.max_episode_steps };
    let plan = EvalPlan {
        split: Split::Holdout,
        episodes: config.eval_episodes,
        seed: seed::derive(root, seed::EVAL),
        policy: Policy::Greedy,
        parallel: config.parallel,
    };

    let mut env_rng = seed::substream(root, seed::ENV);
    let mut eps_rng = seed::substream(root, seed::EPSILON);
    let mut sampler = seed::substream(root, seed::SAMPLER);
    let mut replay_rng = seed::substream(root, seed::REPLAY);
    let mut target = params.clone();
    let mut opt = Sgd::new(config.learning_rate, config.momentum);
    let mut buffer: ReplayBuffer<Observation> = ReplayBuffer::new(config.replay_capacity)?;
    let mut live: Option<Live> = None;
    let mut updates = 0usize;
    let (mut loss_sum, mut loss_n) = (0.0, 0usize);

    let abort = |step: usize, params: &ParameterSet, e: TrainError| TrainError::Aborted {
        step,
        last_good: Box::new(params.clone()),
        source: Box::new(e),
    };
    let eval_row = |params: &ParameterSet, step: usize, loss: Option<f64>| -> Result<TrainingLogRow, TrainError> {
        let reports = evaluate(net, params, dataset, houses, &plan, &env)?;
        let s = summarize(&reports)?;
        Ok(TrainingLogRow {
            step,
            avg_return: s.avg_return,
            full: s.full,
            partial: s.partial,
            none: s.none,
            epsilon: epsilon_at(step, config),
            loss,
        })
    };

    log.rows.push(eval_row(&params, 0, None).map_err(|e| abort(0, &params, e))?);
    for t in 0..config.total_env_steps {
        let result: Result<(), TrainError> = (|| {
            let cur = match live.take() {
                Some(l) => l,
                None => {
                    let id = train_ids[sampler.gen_range(0..train_ids.len())];
                    let ins = &dataset.instructions()[id];
                    let (state, obs) = reset_episode(&houses[&ins.house], ins, env_rng.next_u64(), &env)?;
                    Live { instruction: id, state, observation: Arc::new(obs) }
                }
            };
            let ins = &dataset.instructions()[cur.instruction];
            let eps = epsilon_at(t, config);
            let a = match explore(net.num_actions(), eps, &mut eps_rng) {
                Some(a) => a,
                None => greedy_action(&net.q_eval(&params, &cur.observation)?),
            };
            let r = step(&houses[&ins.house], &cur.state, ins, Action::try_from_index(a)?, &env)?;
            let goal = r.state.visited.contains(ins.goal());
            let next = Arc::new(r.observation);
            buffer.push(Transition {
                observation: cur.observation,
                action: a,
                reward: r.reward,
                next_observation: next.clone(),
                done: goal,
            });
            if !r.done {
                live = Some(Live { instruction: cur.instruction, state: r.state, observation: next });
            }
            let done_steps = t + 1;
            if done_steps >= config.warmup_steps
                && done_steps % config.update_every == 0
                && buffer.len() >= config.batch_size
            {
                let batch = buffer.sample(config.batch_size, &mut replay_rng)?;
                let loss = train_step(net, &batch, &mut params, &target, &mut opt, config)?;
                loss_sum += loss;
                loss_n += 1;
                updates += 1;
                if updates % config.target_sync_every == 0 {
                    sync_target(&params, &mut target)?;
                }
            }
            Ok(())
        })();
        result.map_err(|e| abort(t, &params, e))?;
        let done_steps = t + 1;
        if done_steps % config.eval_every == 0 || done_steps == config.total_env_steps {
            let loss = (loss_n > 0).then(|| loss_sum / loss_n as f64);
            (loss_sum, loss_n) = (0.0, 0);
            log.rows.push(eval_row(&params, done_steps, loss).map_err(|e| abort(done_steps, &params, e))?);
        }
    }
    Ok(TrainOutcome { params, log })
}
