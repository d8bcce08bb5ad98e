//! Grid ray traversal (DDA) from a cell centre.

use super::{HouseMap, Pose};

/// Result of one ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    /// Euclidean distance in metres, clamped to `max_distance`.
    pub distance: f64,
    pub class_id: u8,
    pub cell: Option<(usize, usize)>,
}

/// Unit direction for a pose's heading rotated counter-clockwise by `offset`.
pub fn ray_direction(pose: &Pose, offset: f64) -> (f64, f64) {
    let (hx, hy) = pose.heading.unit();
    let (hx, hy) = (hx as f64, hy as f64);
    let (s, c) = offset.sin_cos();
    (hx * c - hy * s, hx * s + hy * c)
}

/// Casts a ray from the centre of the pose's cell. Positive `azimuth_offset`
/// turns the ray to the left of the heading. The origin cell never blocks;
/// rays passing exactly through a lattice corner stop if either side cell
/// is opaque.
pub fn raycast(house: &HouseMap, pose: &Pose, azimuth_offset: f64, max_distance: f64) -> RayHit {
    let (dx, dy) = ray_direction(pose, azimuth_offset);
    let (mut cx, mut cy) = (pose.x as isize, pose.y as isize);

    let step_x: isize = if dx >= 0.0 { 1 } else { -1 };
    let step_y: isize = if dy >= 0.0 { 1 } else { -1 };
    let delta_x = if dx == 0.0 { f64::INFINITY } else { (1.0 / dx).abs() };
    let delta_y = if dy == 0.0 { f64::INFINITY } else { (1.0 / dy).abs() };
    // From a cell centre the first boundary is half a cell away on each axis.
    let mut side_x = 0.5 * delta_x;
    let mut side_y = 0.5 * delta_y;

    let opaque = |x: isize, y: isize| -> Option<u8> {
        if !house.in_bounds(x, y) {
            return Some(super::house::CLASS_WALL);
        }
        let c = house.cell(x as usize, y as usize);
        c.kind.opaque().then_some(c.class_id)
    };
    let hit = |d: f64, x: isize, y: isize, class_id: u8| {
        let cell = house.in_bounds(x, y).then_some((x as usize, y as usize));
        if d > max_distance {
            RayHit { distance: max_distance, class_id, cell }
        } else {
            RayHit { distance: d, class_id, cell }
        }
    };

    loop {
        let t;
        if side_x < side_y {
            t = side_x;
            cx += step_x;
            side_x += delta_x;
        } else if side_y < side_x {
            t = side_y;
            cy += step_y;
            side_y += delta_y;
        } else {
            t = side_x;
            if let Some(class) = opaque(cx + step_x, cy) {
                return hit(t, cx + step_x, cy, class);
            }
            if let Some(class) = opaque(cx, cy + step_y) {
                return hit(t, cx, cy + step_y, class);
            }
            cx += step_x;
            cy += step_y;
            side_x += delta_x;
            side_y += delta_y;
        }
        if t > max_distance {
            return RayHit { distance: max_distance, class_id: super::house::CLASS_WALL, cell: None };
        }
        if let Some(class) = opaque(cx, cy) {
            return hit(t, cx, cy, class);
        }
    }
}
