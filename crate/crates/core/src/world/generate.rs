//! Procedural multi-room houses: recursive wall splits with one door per
//! split, then object landmarks placed against walls while keeping every
//! walkable cell connected.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CellKind, HouseMap, Region, RegionKind, WorldError, CLASS_DOOR, CLASS_FLOOR, CLASS_WALL, FIRST_OBJECT_CLASS, RESERVED_CLASSES};

/// Object classes shared by every generated house, so class ids agree
/// across houses. Letter `a` is the first entry.
pub const OBJECT_CLASSES: [&str; 12] = [
    "bed", "bookshelf", "chair", "couch", "desk", "dresser", "lamp", "plant", "sink", "table", "toilet", "tv",
];

pub const ROOM_NAMES: [&str; 16] = [
    "bathroom",
    "bedroom",
    "closet",
    "den",
    "dining_room",
    "gym",
    "hallway",
    "kitchen",
    "laundry",
    "library",
    "living_room",
    "lounge",
    "nursery",
    "office",
    "pantry",
    "study",
];

const MIN_ROOM: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct GenerateConfig {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub min_objects: usize,
    pub max_objects: usize,
}

impl GenerateConfig {
    pub fn new(name: impl Into<String>, width: usize, height: usize, seed: u64) -> Self {
        Self { name: name.into(), width, height, seed, min_objects: 4, max_objects: 8 }
    }
}

/// Full class table used by generated houses.
pub fn standard_class_names() -> Vec<String> {
    RESERVED_CLASSES.iter().chain(OBJECT_CLASSES.iter()).map(|s| s.to_string()).collect()
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

impl Rect {
    fn w(&self) -> usize {
        self.x1 - self.x0 + 1
    }
    fn h(&self) -> usize {
        self.y1 - self.y0 + 1
    }
}

struct Builder {
    width: usize,
    kinds: Vec<CellKind>,
}

impl Builder {
    fn get(&self, x: usize, y: usize) -> CellKind {
        self.kinds[y * self.width + x]
    }
    fn set(&mut self, x: usize, y: usize, k: CellKind) {
        self.kinds[y * self.width + x] = k;
    }
}

pub fn generate_house(config: &GenerateConfig) -> Result<HouseMap, WorldError> {
    let (w, h) = (config.width, config.height);
    if w < 2 * MIN_ROOM + 3 && h < 2 * MIN_ROOM + 3 {
        return Err(WorldError::Generation(format!(
            "{w}x{h} is too small for two rooms; need width or height >= {}",
            2 * MIN_ROOM + 3
        )));
    }
    if w < MIN_ROOM + 2 || h < MIN_ROOM + 2 || w > 200 || h > 200 {
        return Err(WorldError::Generation(format!("unsupported size {w}x{h}")));
    }
    if config.min_objects > config.max_objects || config.max_objects > OBJECT_CLASSES.len() {
        return Err(WorldError::Generation("object count range is invalid".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut b = Builder { width: w, kinds: vec![CellKind::Floor; w * h] };
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                b.set(x, y, CellKind::Wall);
            }
        }
    }

    let mut leaves = Vec::new();
    let mut doors = Vec::new();
    let mut stack = vec![(Rect { x0: 1, y0: 1, x1: w - 2, y1: h - 2 }, 0usize)];
    while let Some((rect, depth)) = stack.pop() {
        let room_budget = ROOM_NAMES.len() - leaves.len() - stack.len();
        let stop = depth > 0 && (room_budget <= 1 || rect.w() * rect.h() <= 24 || rng.gen_bool(0.15));
        let split = if stop { None } else { split_rect(&mut b, rect, &mut rng) };
        match split {
            Some((a, c, door)) => {
                doors.push(door);
                stack.push((a, depth + 1));
                stack.push((c, depth + 1));
            }
            None => leaves.push(rect),
        }
    }
    if leaves.len() < 2 {
        return Err(WorldError::Generation(format!("{w}x{h} produced a single room")));
    }

    let n_objects = rng.gen_range(config.min_objects..=config.max_objects);
    let mut object_names: Vec<usize> = (0..OBJECT_CLASSES.len()).collect();
    object_names.shuffle(&mut rng);
    let mut objects: Vec<(usize, (usize, usize))> = Vec::new();
    for &class_idx in object_names.iter().take(n_objects) {
        let mut placed = false;
        for _ in 0..200 {
            let rect = leaves[rng.gen_range(0..leaves.len())];
            let x = rng.gen_range(rect.x0..=rect.x1);
            let y = rng.gen_range(rect.y0..=rect.y1);
            if b.get(x, y) != CellKind::Floor || !against_wall(&b, x, y) || near_door(&b, x, y) {
                continue;
            }
            b.set(x, y, CellKind::Object);
            if connected(&b, w, h) {
                objects.push((class_idx, (x, y)));
                placed = true;
                break;
            }
            b.set(x, y, CellKind::Floor);
        }
        if !placed && objects.len() < config.min_objects {
            return Err(WorldError::Generation(format!("could not place {} objects in {w}x{h}", config.min_objects)));
        }
    }

    let mut room_names: Vec<&str> = ROOM_NAMES.to_vec();
    room_names.shuffle(&mut rng);
    let mut regions = Vec::new();
    for (rect, name) in leaves.iter().zip(room_names) {
        let cells: Vec<_> = (rect.y0..=rect.y1)
            .flat_map(|y| (rect.x0..=rect.x1).map(move |x| (x, y)))
            .filter(|&(x, y)| b.get(x, y) == CellKind::Floor)
            .collect();
        regions.push(Region { name: name.to_string(), kind: RegionKind::Room, cells });
    }
    for (i, &(x, y)) in doors.iter().enumerate() {
        regions.push(Region { name: format!("door_{i}"), kind: RegionKind::Room, cells: vec![(x, y)] });
    }
    let mut grid: Vec<(CellKind, u8)> = b
        .kinds
        .iter()
        .map(|&k| match k {
            CellKind::Floor => (k, CLASS_FLOOR),
            CellKind::Wall => (k, CLASS_WALL),
            CellKind::Door => (k, CLASS_DOOR),
            CellKind::Object => (k, 0),
        })
        .collect();
    for &(class_idx, (x, y)) in &objects {
        grid[y * w + x].1 = FIRST_OBJECT_CLASS + class_idx as u8;
        regions.push(Region { name: OBJECT_CLASSES[class_idx].to_string(), kind: RegionKind::Object, cells: vec![(x, y)] });
    }
    HouseMap::from_parts(config.name.clone(), w, h, grid, regions, standard_class_names())
}

/// Splits `rect` with a wall line holding one door. Lines whose ends would
/// butt against an existing door are skipped.
fn split_rect(b: &mut Builder, rect: Rect, rng: &mut ChaCha8Rng) -> Option<(Rect, Rect, (usize, usize))> {
    let can_v = rect.w() > 2 * MIN_ROOM;
    let can_h = rect.h() > 2 * MIN_ROOM;
    let vertical = match (can_v, can_h) {
        (false, false) => return None,
        (true, false) => true,
        (false, true) => false,
        (true, true) => {
            if rect.w() == rect.h() {
                rng.gen_bool(0.5)
            } else {
                rect.w() > rect.h()
            }
        }
    };
    if vertical {
        let mut options: Vec<usize> = (rect.x0 + MIN_ROOM..=rect.x1 - MIN_ROOM)
            .filter(|&s| b.get(s, rect.y0 - 1) != CellKind::Door && b.get(s, rect.y1 + 1) != CellKind::Door)
            .collect();
        options.shuffle(rng);
        let s = *options.first()?;
        for y in rect.y0..=rect.y1 {
            b.set(s, y, CellKind::Wall);
        }
        let dy = rng.gen_range(rect.y0..=rect.y1);
        b.set(s, dy, CellKind::Door);
        Some((Rect { x1: s - 1, ..rect }, Rect { x0: s + 1, ..rect }, (s, dy)))
    } else {
        let mut options: Vec<usize> = (rect.y0 + MIN_ROOM..=rect.y1 - MIN_ROOM)
            .filter(|&s| b.get(rect.x0 - 1, s) != CellKind::Door && b.get(rect.x1 + 1, s) != CellKind::Door)
            .collect();
        options.shuffle(rng);
        let s = *options.first()?;
        for x in rect.x0..=rect.x1 {
            b.set(x, s, CellKind::Wall);
        }
        let dx = rng.gen_range(rect.x0..=rect.x1);
        b.set(dx, s, CellKind::Door);
        Some((Rect { y1: s - 1, ..rect }, Rect { y0: s + 1, ..rect }, (dx, s)))
    }
}

fn neighbours4(x: usize, y: usize) -> [(usize, usize); 4] {
    [(x + 1, y), (x, y + 1), (x - 1, y), (x, y - 1)]
}

fn against_wall(b: &Builder, x: usize, y: usize) -> bool {
    neighbours4(x, y).iter().any(|&(nx, ny)| b.get(nx, ny) == CellKind::Wall)
}

fn near_door(b: &Builder, x: usize, y: usize) -> bool {
    (y - 1..=y + 1).any(|ny| (x - 1..=x + 1).any(|nx| b.get(nx, ny) == CellKind::Door))
}

fn connected(b: &Builder, w: usize, h: usize) -> bool {
    let walk: Vec<usize> = (0..w * h).filter(|&i| b.kinds[i].walkable()).collect();
    let Some(&start) = walk.first() else { return false };
    let mut seen = vec![false; w * h];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0;
    while let Some(i) = stack.pop() {
        count += 1;
        let (x, y) = (i % w, i / w);
        for (nx, ny) in neighbours4(x, y) {
            let j = ny * w + nx;
            if !seen[j] && b.kinds[j].walkable() {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    count == walk.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generates_house_one_dimensions() {
        let h = generate_house(&GenerateConfig::new("house_a", 23, 18, 1)).unwrap();
        assert_eq!((h.width(), h.height()), (23, 18));
        assert!(h.is_connected());
        let rooms = h.regions().iter().filter(|r| r.kind == RegionKind::Room && !h.is_door_region(r)).count();
        let objects = h.regions().iter().filter(|r| r.kind == RegionKind::Object).count();
        assert!(rooms >= 2, "{rooms} rooms");
        assert!((4..=8).contains(&objects), "{objects} objects");
        assert_eq!(h.num_classes(), 16);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_house(&GenerateConfig::new("h", 14, 20, 7)).unwrap().to_text();
        let b = generate_house(&GenerateConfig::new("h", 14, 20, 7)).unwrap().to_text();
        assert_eq!(a, b);
    }

    #[test]
    fn many_seeds_are_connected_with_reachable_objects() {
        for seed in 0..40 {
            let h = generate_house(&GenerateConfig::new("h", 16, 12, seed)).unwrap();
            assert!(h.is_connected(), "seed {seed}");
            for r in h.regions() {
                assert!(!h.credit_cells(r).is_empty(), "seed {seed} region {}", r.name);
            }
            assert_eq!(HouseMap::parse(&h.to_text()).unwrap(), h);
        }
    }

    #[test]
    fn rejects_tiny_sizes() {
        assert!(generate_house(&GenerateConfig::new("h", 6, 6, 1)).is_err());
    }
}
