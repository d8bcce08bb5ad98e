//! Greedy rollouts and the analysis surface built on them: success classes,
//! waypoint histograms, per-word success, step statistics and attention
//! heatmaps.

mod metrics;
mod report;

pub use metrics::{
    per_word_success, step_statistics, summarize, waypoint_histogram, EvalSummary, StepStatistics, WaypointHistogram,
};
pub(crate) use report::token_strings;
pub use report::{export_attention_heatmap, write_report_bundle};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::ParameterSet;
use crate::dqn::select_action;
use crate::lang::{Houses, Instruction, InstructionDataset, LangError, Split};
use crate::model::{FollowNet, ModelError};
use crate::world::{episode_return, reset_episode, step, Action, EnvConfig, HouseMap, Pose, WorldError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no episodes to evaluate: {0}")]
    Empty(String),
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuccessClass {
    Full,
    Partial,
    None,
}

impl SuccessClass {
    pub fn of(reached: usize, total: usize) -> Self {
        if total > 0 && reached == total {
            SuccessClass::Full
        } else if reached == 0 {
            SuccessClass::None
        } else {
            SuccessClass::Partial
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SuccessClass::Full => "full",
            SuccessClass::Partial => "partial",
            SuccessClass::None => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Policy {
    Greedy,
    EpsilonGreedy(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeReport {
    /// Index of the instruction in its dataset.
    pub instruction_id: usize,
    pub waypoints_total: usize,
    pub waypoints_reached: usize,
    pub steps_taken: usize,
    pub success: SuccessClass,
    /// Counts in action order (left, forward, right).
    pub action_counts: [usize; 3],
    pub total_return: f64,
    /// One column of `k` weights per step; `None` in baseline mode.
    pub attention: Option<Vec<Vec<f64>>>,
    /// Pose before each step plus the final pose (`steps_taken + 1` entries).
    pub poses: Vec<Pose>,
}

impl EpisodeReport {
    pub fn turn_count(&self) -> usize {
        self.action_counts[Action::TurnLeft.index()] + self.action_counts[Action::TurnRight.index()]
    }
}

/// Rolls one episode from a seeded reset until the goal or the step limit.
/// Parameters are only read.
pub fn run_episode(
    net: &FollowNet,
    params: &ParameterSet,
    house: &HouseMap,
    instruction: &Instruction,
    instruction_id: usize,
    seed: u64,
    policy: Policy,
    env: &EnvConfig,
) -> Result<EpisodeReport, EvalError> {
    let (mut state, mut obs) = reset_episode(house, instruction, seed, env)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut attention = net.config().attention.then(Vec::new);
    let mut counts = [0usize; 3];
    let mut poses = vec![state.pose];
    loop {
        let (q, trace) = net.q_values(params, &obs)?;
        if let Some(cols) = attention.as_mut() {
            cols.push(trace.alpha);
        }
        let a = match policy {
            Policy::Greedy => crate::model::greedy_action(&q),
            Policy::EpsilonGreedy(eps) => select_action(&q, eps, &mut rng),
        };
        let r = step(house, &state, instruction, Action::try_from_index(a)?, env)?;
        counts[a] += 1;
        state = r.state;
        obs = r.observation;
        poses.push(state.pose);
        if r.done {
            break;
        }
    }
    let reached = instruction.waypoints.iter().filter(|w| state.visited.contains(*w)).count();
    let total = instruction.waypoints.len();
    Ok(EpisodeReport {
        instruction_id,
        waypoints_total: total,
        waypoints_reached: reached,
        steps_taken: state.steps_taken,
        success: SuccessClass::of(reached, total),
        action_counts: counts,
        total_return: episode_return(&state, instruction),
        attention,
        poses,
    })
}

/// Which instructions an evaluation draws from and how many queries it runs.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPlan {
    /// Falls back to the train split when the requested split is empty.
    pub split: Split,
    pub episodes: usize,
    pub seed: u64,
    pub policy: Policy,
    pub parallel: bool,
}

/// Instruction indices an evaluation will cycle through.
pub fn eval_indices(dataset: &InstructionDataset, split: Split) -> Vec<usize> {
    let idx = dataset.indices(split);
    if idx.is_empty() {
        dataset.indices(Split::Train)
    } else {
        idx
    }
}

/// Runs `plan.episodes` queries: query `i` uses instruction
/// `indices[i mod n]` with a start drawn from its own seed. Reports come
/// back in query order regardless of threading.
pub fn evaluate(
    net: &FollowNet,
    params: &ParameterSet,
    dataset: &InstructionDataset,
    houses: &Houses,
    plan: &EvalPlan,
    env: &EnvConfig,
) -> Result<Vec<EpisodeReport>, EvalError> {
    let indices = eval_indices(dataset, plan.split);
    if indices.is_empty() {
        return Err(EvalError::Empty("dataset has no instructions".into()));
    }
    let run = |i: usize| -> Result<EpisodeReport, EvalError> {
        let id = indices[i % indices.len()];
        let ins = &dataset.instructions()[id];
        let house = houses
            .get(&ins.house)
            .ok_or_else(|| EvalError::Lang(LangError::Validation(vec![format!("unknown house `{}`", ins.house)])))?;
        let seed = crate::seed::derive(plan.seed, &format!("{}/{i}", crate::seed::EVAL));
        run_episode(net, params, house, ins, id, seed, plan.policy, env)
    };
    if plan.parallel {
        (0..plan.episodes).into_par_iter().map(run).collect()
    } else {
        (0..plan.episodes).map(run).collect()
    }
}
