//! Templated instruction generation with hidden waypoint annotations.
//!
//! Each waypoint becomes one clause. Doors use the exit family, objects the
//! turn-at family and rooms the go-through family. The direction word of a
//! clause comes from the first turn on the shortest path into that waypoint,
//! relative to the heading the previous segment ended with.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vocab::{build_vocab, tokenize};
use super::{Instruction, LangError, Split};
use crate::world::{Heading, HouseMap, Region, RegionKind};

const VERBS: [&str; 3] = ["go", "walk", "head"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Turn {
    Left,
    Right,
    Around,
    Straight,
}

impl Turn {
    fn between(from: Heading, to: Heading) -> Self {
        if to == from {
            Turn::Straight
        } else if to == from.left() {
            Turn::Left
        } else if to == from.right() {
            Turn::Right
        } else {
            Turn::Around
        }
    }

    fn word(self) -> &'static str {
        match self {
            Turn::Left => "left",
            Turn::Right => "right",
            Turn::Around => "around",
            Turn::Straight => "straight",
        }
    }
}

/// One traced segment of an instruction's route.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub waypoint: String,
    pub cells: Vec<(usize, usize)>,
    /// `None` for the opening segment, which has no incoming heading.
    pub turn: Option<Turn>,
}

fn display_name(region: &str) -> String {
    region.replace('_', " ")
}

fn start_cell(house: &HouseMap, start_region: &str) -> Result<(usize, usize), LangError> {
    let region = house
        .region(start_region)
        .ok_or_else(|| LangError::Generation(format!("unknown start region `{start_region}`")))?;
    region
        .cells
        .iter()
        .copied()
        .find(|&(x, y)| house.walkable(x, y))
        .ok_or_else(|| LangError::Generation(format!("start region `{start_region}` has no walkable cell")))
}

/// Follows shortest paths from the start region's first cell through each
/// waypoint in order. Fails if any waypoint is unreachable.
pub fn trace_route(house: &HouseMap, start_region: &str, waypoints: &[String]) -> Result<Vec<Segment>, LangError> {
    let mut cur = start_cell(house, start_region)?;
    let mut incoming: Option<Heading> = None;
    let mut segments = Vec::new();
    for name in waypoints {
        let region = house
            .region(name)
            .ok_or_else(|| LangError::Generation(format!("unknown waypoint region `{name}`")))?;
        let targets = house.credit_cells(region);
        let path = house
            .shortest_path(cur, &targets)
            .ok_or_else(|| LangError::Generation(format!("waypoint `{name}` is unreachable")))?;
        let moves: Vec<Heading> = path
            .windows(2)
            .filter_map(|w| Heading::from_unit(w[1].0 as isize - w[0].0 as isize, w[1].1 as isize - w[0].1 as isize))
            .collect();
        let turn = incoming.map(|inc| {
            moves.iter().find(|&&m| m != inc).map_or(Turn::Straight, |&m| Turn::between(inc, m))
        });
        if let Some(&last) = moves.last() {
            incoming = Some(last);
        }
        cur = *path.last().expect("paths include their start");
        segments.push(Segment { waypoint: name.clone(), cells: path, turn });
    }
    Ok(segments)
}

fn clause(house: &HouseMap, region: &Region, turn: Option<Turn>, rng: &mut ChaCha8Rng) -> String {
    let verb = *VERBS.choose(rng).expect("non-empty");
    let name = display_name(&region.name);
    let turning = matches!(turn, Some(Turn::Left | Turn::Right | Turn::Around));
    let dir = turn.map_or("straight", Turn::word);
    let options: Vec<String> = if house.is_door_region(region) {
        if turning {
            vec![
                format!("turn {dir} and {verb} out the door"),
                format!("{verb} {dir} through the door"),
                format!("turn {dir} and exit through the door"),
            ]
        } else {
            vec![
                format!("{verb} out the door"),
                "exit the room".to_string(),
                format!("{verb} through the door"),
            ]
        }
    } else if region.kind == RegionKind::Object {
        if turning {
            vec![
                format!("turn {dir} at the {name}"),
                format!("{verb} {dir} to the {name}"),
                format!("take a {dir} at the {name}"),
            ]
        } else {
            vec![
                format!("{verb} straight to the {name}"),
                format!("{verb} to the {name}"),
                format!("stop at the {name}"),
            ]
        }
    } else if turning {
        vec![format!("turn {dir} into the {name}"), format!("{verb} {dir} into the {name}")]
    } else {
        vec![
            format!("{verb} across into the {name}"),
            format!("{verb} straight into the {name}"),
            format!("enter the {name}"),
        ]
    };
    options.choose(rng).expect("non-empty").clone()
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Generates one instruction for the route `start_region → waypoint_path`.
/// `goal_region` is appended when the path does not already end with it.
pub fn generate_instruction(
    house: &HouseMap,
    start_region: &str,
    goal_region: &str,
    waypoint_path: &[String],
    rng_seed: u64,
) -> Result<Instruction, LangError> {
    let mut waypoints = waypoint_path.to_vec();
    if waypoints.last().map(String::as_str) != Some(goal_region) {
        waypoints.push(goal_region.to_string());
    }
    let unique: BTreeSet<&String> = waypoints.iter().collect();
    if unique.len() != waypoints.len() {
        return Err(LangError::Generation("waypoints repeat".into()));
    }
    let segments = trace_route(house, start_region, &waypoints)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut text = String::new();
    for (i, seg) in segments.iter().enumerate() {
        let region = house.region(&seg.waypoint).expect("traced regions exist");
        let c = clause(house, region, seg.turn, &mut rng);
        if i == 0 {
            text.push_str(&capitalize(&c));
        } else {
            match rng.gen_range(0..3) {
                0 => {
                    text.push_str(", then ");
                    text.push_str(&c);
                }
                1 => {
                    text.push_str(" and ");
                    text.push_str(&c);
                }
                _ => {
                    text.push_str(". Then ");
                    text.push_str(&c);
                }
            }
        }
    }
    text.push('.');
    let vocab = build_vocab(&[text.as_str()]);
    Ok(Instruction {
        house: house.name().to_string(),
        tokens: Arc::new(tokenize(&text, &vocab)),
        text,
        start_region: start_region.to_string(),
        waypoints,
        split: Split::Train,
    })
}

/// Doors, rooms and objects met along the shortest route from the start
/// region to the goal, in encounter order, excluding the goal itself.
pub fn natural_waypoints(house: &HouseMap, start_region: &str, goal_region: &str) -> Result<Vec<String>, LangError> {
    let goal = house
        .region(goal_region)
        .ok_or_else(|| LangError::Generation(format!("unknown goal region `{goal_region}`")))?;
    let from = start_cell(house, start_region)?;
    let path = house
        .shortest_path(from, &house.credit_cells(goal))
        .ok_or_else(|| LangError::Generation(format!("goal `{goal_region}` is unreachable")))?;
    let mut out: Vec<String> = Vec::new();
    let mut push = |name: &str| {
        if name != goal_region && name != start_region && !out.iter().any(|n| n == name) {
            out.push(name.to_string());
        }
    };
    for &(x, y) in &path {
        for r in house.regions() {
            let hit = match r.kind {
                RegionKind::Room => r.cells.contains(&(x, y)),
                RegionKind::Object => r.cells.iter().any(|&(cx, cy)| cx.abs_diff(x) + cy.abs_diff(y) == 1),
            };
            if hit {
                push(&r.name);
            }
        }
    }
    Ok(out)
}

/// Picks `count − 1` ordered intermediates from the natural waypoints and
/// appends the goal. Returns fewer when the route is short.
pub fn sample_waypoints(
    house: &HouseMap,
    start_region: &str,
    goal_region: &str,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<String>, LangError> {
    let natural = natural_waypoints(house, start_region, goal_region)?;
    let want = count.saturating_sub(1).min(natural.len());
    let mut picks: Vec<usize> = rand::seq::index::sample(rng, natural.len(), want).into_vec();
    picks.sort_unstable();
    let mut out: Vec<String> = picks.into_iter().map(|i| natural[i].clone()).collect();
    out.push(goal_region.to_string());
    Ok(out)
}
