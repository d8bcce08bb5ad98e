//! Grid house environment: map model, deterministic dynamics, sparse
//! waypoint reward and first-person semantic/depth rendering.

mod episode;
pub mod generate;
mod house;
mod raycast;
mod render;

pub use episode::{episode_return, reset_episode, reward_for, step, EnvConfig, EpisodeState, StepResult, FINAL_REWARD, WAYPOINT_REWARD};
pub use generate::{generate_house, GenerateConfig, OBJECT_CLASSES, ROOM_NAMES};
pub use house::{
    Cell, CellKind, HouseMap, Region, RegionKind, CLASS_CEILING, CLASS_DOOR, CLASS_FLOOR, CLASS_WALL, FIRST_OBJECT_CLASS,
    RESERVED_CLASSES,
};
pub use raycast::{ray_direction, raycast, RayHit};
pub use render::{render_observation, Observation, RenderConfig};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid house: {0}")]
    Invalid(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Facing direction, listed in counter-clockwise order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Heading {
    PosX,
    PosY,
    NegX,
    NegY,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::PosX, Heading::PosY, Heading::NegX, Heading::NegY];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 4]
    }

    /// +90°.
    pub fn left(self) -> Self {
        Self::from_index(self.index() + 1)
    }

    /// −90°.
    pub fn right(self) -> Self {
        Self::from_index(self.index() + 3)
    }

    pub fn unit(self) -> (isize, isize) {
        match self {
            Heading::PosX => (1, 0),
            Heading::PosY => (0, 1),
            Heading::NegX => (-1, 0),
            Heading::NegY => (0, -1),
        }
    }

    pub fn from_unit(dx: isize, dy: isize) -> Option<Self> {
        Self::ALL.into_iter().find(|h| h.unit() == (dx, dy))
    }

    pub fn label(self) -> &'static str {
        match self {
            Heading::PosX => "+x",
            Heading::PosY => "+y",
            Heading::NegX => "-x",
            Heading::NegY => "-y",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Pose {
    pub x: usize,
    pub y: usize,
    pub heading: Heading,
}

/// The three locomotion primitives, in Q-vector order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    TurnLeft,
    Forward,
    TurnRight,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::TurnLeft, Action::Forward, Action::TurnRight];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Like [`Action::from_index`], with a usage error for bad indices.
    pub fn try_from_index(i: usize) -> Result<Self, WorldError> {
        Self::from_index(i).ok_or_else(|| WorldError::Usage(format!("action index {i} out of range")))
    }

    pub fn is_turn(self) -> bool {
        self != Action::Forward
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::TurnLeft => "turn_left",
            Action::Forward => "forward",
            Action::TurnRight => "turn_right",
        }
    }
}

/// Applies an action to a pose. Forward into a non-walkable cell is a no-op.
pub fn apply_action(house: &HouseMap, pose: Pose, action: Action) -> Pose {
    match action {
        Action::TurnLeft => Pose { heading: pose.heading.left(), ..pose },
        Action::TurnRight => Pose { heading: pose.heading.right(), ..pose },
        Action::Forward => {
            let (dx, dy) = pose.heading.unit();
            let (nx, ny) = (pose.x as isize + dx, pose.y as isize + dy);
            if house.in_bounds(nx, ny) && house.walkable(nx as usize, ny as usize) {
                Pose { x: nx as usize, y: ny as usize, ..pose }
            } else {
                pose
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_rotation_group() {
        for h in Heading::ALL {
            assert_eq!(h.left().left().left().left(), h);
            assert_eq!(h.left().right(), h);
            assert_eq!(h.right().left(), h);
        }
        assert_eq!(Heading::PosX.left(), Heading::PosY);
        assert_eq!(Heading::PosX.right(), Heading::NegY);
    }
}
