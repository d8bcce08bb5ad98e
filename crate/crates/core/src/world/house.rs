//! House maps and their text format.
//!
//! ```text
//! house <name> <width> <height>
//! class <id> <name>          (ids 0..=3 are floor, wall, ceiling, door)
//! <height rows of width cell codes>   # wall, . floor, D door, a-z objects
//! region <name> room|object <x,y>;<x,y>;...
//! ```
//!
//! Object letter `a` is class 4, `b` is class 5, and so on.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt::Write as _;

use super::WorldError;

pub const CLASS_FLOOR: u8 = 0;
pub const CLASS_WALL: u8 = 1;
pub const CLASS_CEILING: u8 = 2;
pub const CLASS_DOOR: u8 = 3;
pub const FIRST_OBJECT_CLASS: u8 = 4;
pub const RESERVED_CLASSES: [&str; 4] = ["floor", "wall", "ceiling", "door"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellKind {
    Floor,
    Wall,
    Door,
    Object,
}

impl CellKind {
    pub fn walkable(self) -> bool {
        matches!(self, CellKind::Floor | CellKind::Door)
    }

    /// Wall, door and object cells stop rays.
    pub fn opaque(self) -> bool {
        !matches!(self, CellKind::Floor)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub kind: CellKind,
    pub class_id: u8,
    /// Index of the first room region covering this cell.
    pub room: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RegionKind {
    Room,
    Object,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub name: String,
    pub kind: RegionKind,
    /// Cells `(x, y)` sorted row-major.
    pub cells: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HouseMap {
    name: String,
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    regions: Vec<Region>,
    class_names: Vec<String>,
}

fn row_major(cells: &mut [(usize, usize)]) {
    cells.sort_by_key(|&(x, y)| (y, x));
}

impl HouseMap {
    /// Builds and validates a house from raw parts. `kinds`/`classes` are
    /// row-major with `width * height` entries.
    pub fn from_parts(
        name: impl Into<String>,
        width: usize,
        height: usize,
        grid: Vec<(CellKind, u8)>,
        mut regions: Vec<Region>,
        class_names: Vec<String>,
    ) -> Result<Self, WorldError> {
        let name = name.into();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(WorldError::Invalid(format!("house name `{name}` must be one non-empty word")));
        }
        if grid.len() != width * height || width < 3 || height < 3 {
            return Err(WorldError::Invalid(format!("grid has {} cells for {width}x{height}", grid.len())));
        }
        for r in regions.iter_mut() {
            row_major(&mut r.cells);
            r.cells.dedup();
        }
        regions.sort_by(|a, b| a.name.cmp(&b.name));
        let mut cells: Vec<Cell> = grid.into_iter().map(|(kind, class_id)| Cell { kind, class_id, room: None }).collect();
        for (ri, r) in regions.iter().enumerate() {
            if r.kind != RegionKind::Room {
                continue;
            }
            for &(x, y) in &r.cells {
                if x < width && y < height {
                    let c = &mut cells[y * width + x];
                    c.room.get_or_insert(ri);
                }
            }
        }
        let house = Self { name, width, height, cells, regions, class_names };
        house.validate()?;
        Ok(house)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let inv = |m: String| Err(WorldError::Invalid(m));
        if self.class_names.len() < RESERVED_CLASSES.len() || self.class_names.len() > 30 {
            return inv(format!("class table has {} entries", self.class_names.len()));
        }
        for (i, want) in RESERVED_CLASSES.iter().enumerate() {
            if self.class_names[i] != *want {
                return inv(format!("class {i} must be `{want}`, found `{}`", self.class_names[i]));
            }
        }
        let names: HashSet<&str> = self.class_names.iter().map(String::as_str).collect();
        if names.len() != self.class_names.len() {
            return inv("duplicate class names".into());
        }
        for y in 0..self.height {
            for x in 0..self.width {
                let c = self.cell(x, y);
                let expected_ok = match c.kind {
                    CellKind::Floor => c.class_id == CLASS_FLOOR,
                    CellKind::Wall => c.class_id == CLASS_WALL,
                    CellKind::Door => c.class_id == CLASS_DOOR,
                    CellKind::Object => c.class_id >= FIRST_OBJECT_CLASS && (c.class_id as usize) < self.class_names.len(),
                };
                if !expected_ok {
                    return inv(format!("cell ({x},{y}) has kind {:?} with class {}", c.kind, c.class_id));
                }
                let border = x == 0 || y == 0 || x + 1 == self.width || y + 1 == self.height;
                if border && c.kind != CellKind::Wall {
                    return inv(format!("border cell ({x},{y}) is not a wall"));
                }
            }
        }
        let mut seen = HashSet::new();
        for r in &self.regions {
            if r.name.is_empty() || r.name.contains(char::is_whitespace) {
                return inv(format!("bad region name `{}`", r.name));
            }
            if !seen.insert(r.name.as_str()) {
                return inv(format!("duplicate region `{}`", r.name));
            }
            if r.cells.is_empty() {
                return inv(format!("region `{}` has no cells", r.name));
            }
            for &(x, y) in &r.cells {
                if x >= self.width || y >= self.height {
                    return inv(format!("region `{}` cell ({x},{y}) out of bounds", r.name));
                }
                let kind = self.cell(x, y).kind;
                let ok = match r.kind {
                    RegionKind::Object => kind == CellKind::Object,
                    RegionKind::Room => kind.walkable(),
                };
                if !ok {
                    return inv(format!("region `{}` covers {:?} cell ({x},{y})", r.name, kind));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, name: &str) -> Option<&Region> {
        self.regions
            .binary_search_by(|r| r.name.as_str().cmp(name))
            .ok()
            .map(|i| &self.regions[i])
    }

    pub fn in_bounds(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn cell(&self, x: usize, y: usize) -> &Cell {
        &self.cells[y * self.width + x]
    }

    pub fn walkable(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.cell(x, y).kind.walkable()
    }

    /// Walkable 4-neighbours of a cell.
    pub fn neighbours(&self, x: usize, y: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (x, y) = (x as isize, y as isize);
        [(1, 0), (0, 1), (-1, 0), (0, -1)].into_iter().filter_map(move |(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            (self.in_bounds(nx, ny) && self.walkable(nx as usize, ny as usize)).then_some((nx as usize, ny as usize))
        })
    }

    /// Cells where standing counts as being at a region: the region's own
    /// cells for rooms, walkable cells 4-adjacent to it for objects.
    pub fn credit_cells(&self, region: &Region) -> BTreeSet<(usize, usize)> {
        match region.kind {
            RegionKind::Room => region.cells.iter().copied().collect(),
            RegionKind::Object => region.cells.iter().flat_map(|&(x, y)| self.neighbours(x, y)).collect(),
        }
    }

    pub fn is_door_region(&self, region: &Region) -> bool {
        region.kind == RegionKind::Room && region.cells.iter().all(|&(x, y)| self.cell(x, y).kind == CellKind::Door)
    }

    pub fn walkable_cells(&self) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .filter(|&(x, y)| self.walkable(x, y))
            .collect()
    }

    /// Breadth-first distances over walkable cells from a set of sources.
    pub fn bfs_distances(&self, sources: impl IntoIterator<Item = (usize, usize)>) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.width * self.height];
        let mut queue = VecDeque::new();
        for (x, y) in sources {
            if self.walkable(x, y) && dist[y * self.width + x].is_none() {
                dist[y * self.width + x] = Some(0);
                queue.push_back((x, y));
            }
        }
        while let Some((x, y)) = queue.pop_front() {
            let d = dist[y * self.width + x].expect("queued cells have distances");
            for (nx, ny) in self.neighbours(x, y) {
                let slot = &mut dist[ny * self.width + nx];
                if slot.is_none() {
                    *slot = Some(d + 1);
                    queue.push_back((nx, ny));
                }
            }
        }
        dist
    }

    /// Shortest walkable path from `from` to any cell of `targets`, inclusive
    /// of both ends. Ties resolve deterministically (neighbour order +x,+y,−x,−y).
    pub fn shortest_path(&self, from: (usize, usize), targets: &BTreeSet<(usize, usize)>) -> Option<Vec<(usize, usize)>> {
        if targets.contains(&from) {
            return Some(vec![from]);
        }
        let dist = self.bfs_distances(targets.iter().copied());
        let mut cur = from;
        let mut d = dist[cur.1 * self.width + cur.0]?;
        let mut path = vec![cur];
        while d > 0 {
            cur = self
                .neighbours(cur.0, cur.1)
                .find(|&(nx, ny)| dist[ny * self.width + nx] == Some(d - 1))
                .expect("bfs gradient has a descending neighbour");
            d -= 1;
            path.push(cur);
        }
        Some(path)
    }

    /// True when every walkable cell reaches every other.
    pub fn is_connected(&self) -> bool {
        let cells = self.walkable_cells();
        let Some(&first) = cells.first() else { return false };
        let dist = self.bfs_distances([first]);
        cells.iter().all(|&(x, y)| dist[y * self.width + x].is_some())
    }

    /// Parses the text format; errors carry 1-based line numbers.
    pub fn parse(source: &str) -> Result<Self, WorldError> {
        let perr = |line: usize, msg: String| WorldError::Parse { line, msg };
        let mut lines = source.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end())).filter(|(_, l)| !l.is_empty());

        let (ln, header) = lines.next().ok_or_else(|| perr(1, "empty house file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "house" {
            return Err(perr(ln, "expected `house <name> <width> <height>`".into()));
        }
        let name = parts[1].to_string();
        let width: usize = parts[2].parse().map_err(|_| perr(ln, format!("bad width `{}`", parts[2])))?;
        let height: usize = parts[3].parse().map_err(|_| perr(ln, format!("bad height `{}`", parts[3])))?;

        let mut class_names: Vec<String> = Vec::new();
        let mut grid = Vec::with_capacity(width * height);
        let mut rows = 0;
        let mut regions = Vec::new();
        for (ln, line) in lines {
            if let Some(rest) = line.strip_prefix("class ") {
                if rows > 0 {
                    return Err(perr(ln, "class line after grid rows".into()));
                }
                let mut it = rest.split_whitespace();
                let id: usize = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| perr(ln, "expected `class <id> <name>`".into()))?;
                let cname = it.next().ok_or_else(|| perr(ln, "missing class name".into()))?;
                if it.next().is_some() || id != class_names.len() {
                    return Err(perr(ln, format!("class ids must be contiguous from 0; got {id}")));
                }
                class_names.push(cname.to_string());
            } else if let Some(rest) = line.strip_prefix("region ") {
                if rows != height {
                    return Err(perr(ln, format!("region before all {height} grid rows")));
                }
                let mut it = rest.split_whitespace();
                let (Some(rname), Some(kind), Some(list), None) = (it.next(), it.next(), it.next(), it.next()) else {
                    return Err(perr(ln, "expected `region <name> room|object <x,y>;...`".into()));
                };
                let kind = match kind {
                    "room" => RegionKind::Room,
                    "object" => RegionKind::Object,
                    other => return Err(perr(ln, format!("unknown region kind `{other}`"))),
                };
                let mut cells = Vec::new();
                for pair in list.split(';').filter(|s| !s.is_empty()) {
                    let (xs, ys) = pair.split_once(',').ok_or_else(|| perr(ln, format!("bad cell `{pair}`")))?;
                    let x: usize = xs.parse().map_err(|_| perr(ln, format!("bad cell `{pair}`")))?;
                    let y: usize = ys.parse().map_err(|_| perr(ln, format!("bad cell `{pair}`")))?;
                    if x >= width || y >= height {
                        return Err(perr(ln, format!("region `{rname}` cell ({x},{y}) out of bounds")));
                    }
                    cells.push((x, y));
                }
                regions.push(Region { name: rname.to_string(), kind, cells });
            } else {
                if rows >= height {
                    return Err(perr(ln, "unexpected line after grid".into()));
                }
                let chars: Vec<char> = line.chars().collect();
                if chars.len() != width {
                    return Err(perr(ln, format!("grid row has {} cells, expected {width}", chars.len())));
                }
                for ch in chars {
                    let cell = match ch {
                        '#' => (CellKind::Wall, CLASS_WALL),
                        '.' => (CellKind::Floor, CLASS_FLOOR),
                        'D' => (CellKind::Door, CLASS_DOOR),
                        'a'..='z' => {
                            let id = FIRST_OBJECT_CLASS + (ch as u8 - b'a');
                            if id as usize >= class_names.len() {
                                return Err(perr(ln, format!("unknown class for cell code `{ch}`")));
                            }
                            (CellKind::Object, id)
                        }
                        other => return Err(perr(ln, format!("unknown cell code `{other}`"))),
                    };
                    grid.push(cell);
                }
                rows += 1;
            }
        }
        if rows != height {
            return Err(perr(source.lines().count(), format!("expected {height} grid rows, found {rows}")));
        }
        Self::from_parts(name, width, height, grid, regions, class_names)
    }

    /// Canonical text: classes by id, regions by name, cells row-major.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "house {} {} {}", self.name, self.width, self.height);
        for (i, n) in self.class_names.iter().enumerate() {
            let _ = writeln!(out, "class {i} {n}");
        }
        for y in 0..self.height {
            for x in 0..self.width {
                let c = self.cell(x, y);
                out.push(match c.kind {
                    CellKind::Wall => '#',
                    CellKind::Floor => '.',
                    CellKind::Door => 'D',
                    CellKind::Object => (b'a' + (c.class_id - FIRST_OBJECT_CLASS)) as char,
                });
            }
            out.push('\n');
        }
        for r in &self.regions {
            let kind = match r.kind {
                RegionKind::Room => "room",
                RegionKind::Object => "object",
            };
            let cells: Vec<String> = r.cells.iter().map(|(x, y)| format!("{x},{y}")).collect();
            let _ = writeln!(out, "region {} {} {}", r.name, kind, cells.join(";"));
        }
        out
    }

    pub fn load(path: &std::path::Path) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path).map_err(|e| WorldError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), WorldError> {
        std::fs::write(path, self.to_text()).map_err(|e| WorldError::Io(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SMALL: &str = "house tiny 5 4
class 0 floor
class 1 wall
class 2 ceiling
class 3 door
class 4 couch
#####
#.a.#
#..D#
#####
region couch object 2,1
region den room 1,1;3,1;1,2;2,2
region exit room 3,2
";

    #[test]
    fn parse_and_roundtrip() {
        let h = HouseMap::parse(SMALL).unwrap();
        assert_eq!((h.width(), h.height()), (5, 4));
        assert_eq!(h.cell(2, 1).class_id, 4);
        assert_eq!(h.cell(3, 2).kind, CellKind::Door);
        assert_eq!(h.to_text(), SMALL);
        assert!(h.is_door_region(h.region("exit").unwrap()));
        assert!(h.is_connected());
    }

    #[test]
    fn rejects_open_border() {
        let bad = SMALL.replace("#..D#", "#..D.");
        assert!(matches!(HouseMap::parse(&bad), Err(WorldError::Invalid(m)) if m.contains("border")));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = SMALL.replace("#.a.#", "#.a.#x");
        match HouseMap::parse(&bad) {
            Err(WorldError::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
        let bad = SMALL.replace("#.a.#", "#.b.#");
        assert!(matches!(HouseMap::parse(&bad), Err(WorldError::Parse { line: 8, .. })));
        let bad = SMALL.replace("region exit room 3,2", "region exit room 9,2");
        assert!(matches!(HouseMap::parse(&bad), Err(WorldError::Parse { line: 13, .. })));
    }

    #[test]
    fn region_kind_constraints() {
        let bad = SMALL.replace("region couch object 2,1", "region couch object 1,1");
        assert!(HouseMap::parse(&bad).is_err());
        let bad = SMALL.replace("region exit room 3,2", "region exit room 2,1");
        assert!(HouseMap::parse(&bad).is_err());
    }

    #[test]
    fn object_credit_is_adjacency() {
        let h = HouseMap::parse(SMALL).unwrap();
        let credit = h.credit_cells(h.region("couch").unwrap());
        assert_eq!(credit.into_iter().collect::<Vec<_>>(), vec![(1, 1), (2, 2), (3, 1)]);
    }

    #[test]
    fn shortest_path_endpoints() {
        let h = HouseMap::parse(SMALL).unwrap();
        let target: BTreeSet<_> = [(3, 2)].into();
        let p = h.shortest_path((1, 1), &target).unwrap();
        assert_eq!(p.first(), Some(&(1, 1)));
        assert_eq!(p.last(), Some(&(3, 2)));
        assert_eq!(p.len(), 4);
    }
}
