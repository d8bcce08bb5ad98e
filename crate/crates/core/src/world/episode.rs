use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{apply_action, render_observation, Action, Heading, HouseMap, Observation, Pose, RegionKind, RenderConfig, WorldError};
use crate::lang::Instruction;

pub const WAYPOINT_REWARD: f64 = 0.05;
pub const FINAL_REWARD: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub render: RenderConfig,
    pub max_episode_steps: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { render: RenderConfig::default(), max_episode_steps: 100 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeState {
    pub pose: Pose,
    /// Waypoint regions already credited (the final one included once reached).
    pub visited: BTreeSet<String>,
    pub steps_taken: usize,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub state: EpisodeState,
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
}

/// Samples a start cell uniformly from the instruction's start region and a
/// uniform heading, both from `rng_seed`, and renders the first observation.
pub fn reset_episode(
    house: &HouseMap,
    instruction: &Instruction,
    rng_seed: u64,
    config: &EnvConfig,
) -> Result<(EpisodeState, Observation), WorldError> {
    let region = house
        .region(&instruction.start_region)
        .ok_or_else(|| WorldError::Config(format!("unknown start region `{}`", instruction.start_region)))?;
    if region.kind != RegionKind::Room {
        return Err(WorldError::Config(format!("start region `{}` is not walkable", region.name)));
    }
    let cells: Vec<_> = region.cells.iter().copied().filter(|&(x, y)| house.walkable(x, y)).collect();
    if cells.is_empty() {
        return Err(WorldError::Config(format!("start region `{}` is empty", region.name)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (x, y) = cells[rng.gen_range(0..cells.len())];
    let heading = Heading::from_index(rng.gen_range(0..4));
    let pose = Pose { x, y, heading };
    let state = EpisodeState { pose, visited: BTreeSet::new(), steps_taken: 0, done: false };
    let obs = render_observation(house, &pose, instruction.tokens.clone(), &config.render);
    Ok((state, obs))
}

/// Credits the waypoints the current pose lies in. The final waypoint pays
/// [`FINAL_REWARD`] and ends the episode; every other waypoint pays
/// [`WAYPOINT_REWARD`] the first time only.
pub fn reward_for(house: &HouseMap, state: &mut EpisodeState, instruction: &Instruction) -> f64 {
    let Some(last) = instruction.waypoints.len().checked_sub(1) else { return 0.0 };
    let (x, y) = (state.pose.x, state.pose.y);
    let mut reward = 0.0;
    for (i, name) in instruction.waypoints.iter().enumerate() {
        if state.visited.contains(name) {
            continue;
        }
        let Some(region) = house.region(name) else { continue };
        if !in_region(region, x, y) {
            continue;
        }
        state.visited.insert(name.clone());
        if i == last {
            reward += FINAL_REWARD;
            state.done = true;
        } else {
            reward += WAYPOINT_REWARD;
        }
    }
    reward
}

/// Return of an episode computed from its credited waypoints,
/// `FINAL_REWARD·[goal] + WAYPOINT_REWARD·intermediates`. Equals the sum of
/// the step rewards without accumulated rounding.
pub fn episode_return(state: &EpisodeState, instruction: &Instruction) -> f64 {
    let Some(goal) = instruction.waypoints.last() else { return 0.0 };
    let reached_goal = state.visited.contains(goal);
    let intermediates = state.visited.len() - usize::from(reached_goal);
    if reached_goal {
        FINAL_REWARD + WAYPOINT_REWARD * intermediates as f64
    } else {
        WAYPOINT_REWARD * intermediates as f64
    }
}

fn in_region(region: &super::Region, x: usize, y: usize) -> bool {
    match region.kind {
        RegionKind::Room => region.cells.binary_search_by_key(&(y, x), |&(cx, cy)| (cy, cx)).is_ok(),
        RegionKind::Object => region.cells.iter().any(|&(cx, cy)| cx.abs_diff(x) + cy.abs_diff(y) == 1),
    }
}

/// Applies one action. Pure in `state`; no randomness after reset.
pub fn step(
    house: &HouseMap,
    state: &EpisodeState,
    instruction: &Instruction,
    action: Action,
    config: &EnvConfig,
) -> Result<StepResult, WorldError> {
    if state.done {
        return Err(WorldError::Usage("step called on a finished episode".into()));
    }
    let mut next = state.clone();
    next.pose = apply_action(house, state.pose, action);
    next.steps_taken += 1;
    let reward = reward_for(house, &mut next, instruction);
    if next.steps_taken >= config.max_episode_steps {
        next.done = true;
    }
    let observation = render_observation(house, &next.pose, instruction.tokens.clone(), &config.render);
    let done = next.done;
    Ok(StepResult { state: next, observation, reward, done })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{Instruction, Split};
    use std::sync::Arc;

    const MAP: &str = "house strip 7 4
class 0 floor
class 1 wall
class 2 ceiling
class 3 door
class 4 couch
#######
#.....#
#....a#
#######
region couch object 5,2
region east room 4,1;5,1
region mid room 3,1
region west room 1,1;2,1;1,2;2,2
";

    fn instr(waypoints: &[&str]) -> Instruction {
        Instruction {
            house: "strip".into(),
            text: "go".into(),
            tokens: Arc::new(vec![2]),
            start_region: "west".into(),
            waypoints: waypoints.iter().map(|s| s.to_string()).collect(),
            split: Split::Train,
        }
    }

    #[test]
    fn forward_moves_and_blocks() {
        let h = HouseMap::parse(MAP).unwrap();
        let i = instr(&["couch"]);
        let cfg = EnvConfig::default();
        let s = EpisodeState { pose: Pose { x: 2, y: 1, heading: Heading::PosX }, visited: Default::default(), steps_taken: 0, done: false };
        let r = step(&h, &s, &i, Action::Forward, &cfg).unwrap();
        assert_eq!((r.state.pose.x, r.state.pose.y), (3, 1));
        let s = EpisodeState { pose: Pose { x: 1, y: 1, heading: Heading::NegY }, ..s };
        let r = step(&h, &s, &i, Action::Forward, &cfg).unwrap();
        assert_eq!(r.state.pose, s.pose);
        assert_eq!(r.reward, 0.0);
        assert!(!r.done);
    }

    #[test]
    fn waypoints_credit_once_and_final_terminates() {
        let h = HouseMap::parse(MAP).unwrap();
        let i = instr(&["mid", "couch"]);
        let cfg = EnvConfig::default();
        let mut s = EpisodeState { pose: Pose { x: 2, y: 1, heading: Heading::PosX }, visited: Default::default(), steps_taken: 0, done: false };
        let mut rewards = vec![];
        for a in [Action::Forward, Action::TurnLeft, Action::TurnRight, Action::Forward] {
            let r = step(&h, &s, &i, a, &cfg).unwrap();
            rewards.push(r.reward);
            s = r.state;
        }
        // (3,1) mid, turn, turn, (4,1) east: not adjacent to the couch at (5,2).
        assert_eq!(rewards, vec![0.05, 0.0, 0.0, 0.0]);
        let r = step(&h, &s, &i, Action::Forward, &cfg).unwrap();
        assert_eq!(r.reward, 1.0);
        assert!(r.done);
        assert!(step(&h, &r.state, &i, Action::Forward, &cfg).is_err());
        assert_eq!(episode_return(&r.state, &i), 1.05);
        assert_eq!(episode_return(&s, &i), 0.05);
    }

    #[test]
    fn episode_ends_at_step_limit() {
        let h = HouseMap::parse(MAP).unwrap();
        let i = instr(&["couch"]);
        let cfg = EnvConfig { max_episode_steps: 3, ..Default::default() };
        let (mut s, _) = reset_episode(&h, &i, 9, &cfg).unwrap();
        let mut done = false;
        for _ in 0..3 {
            let r = step(&h, &s, &i, Action::TurnLeft, &cfg).unwrap();
            done = r.done;
            s = r.state;
        }
        assert!(done);
        assert_eq!(s.steps_taken, 3);
    }

    #[test]
    fn reset_is_seeded() {
        let h = HouseMap::parse(MAP).unwrap();
        let i = instr(&["couch"]);
        let cfg = EnvConfig::default();
        let a = reset_episode(&h, &i, 42, &cfg).unwrap();
        let b = reset_episode(&h, &i, 42, &cfg).unwrap();
        assert_eq!(a, b);
        let mut bad = i.clone();
        bad.start_region = "couch".into();
        assert!(reset_episode(&h, &bad, 1, &cfg).is_err());
    }
}
