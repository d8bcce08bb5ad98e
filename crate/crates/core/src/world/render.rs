use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{raycast, HouseMap, Pose, CLASS_CEILING, CLASS_FLOOR};
use crate::autodiff::Tensor;

/// Camera parameters for the first-person renderer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view in radians.
    pub fov: f64,
    pub max_distance: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { width: 32, height: 24, fov: std::f64::consts::FRAC_PI_2, max_distance: 20.0 }
    }
}

impl RenderConfig {
    /// Azimuth offset of image column `col`; column 0 is the leftmost.
    pub fn column_offset(&self, col: usize) -> f64 {
        self.fov / 2.0 - (col as f64 + 0.5) * self.fov / self.width as f64
    }
}

/// Everything the agent perceives: semantic labels, depth and the
/// instruction tokens. No pose, region or waypoint data.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub height: usize,
    pub width: usize,
    pub num_classes: usize,
    /// Row-major class id per pixel.
    pub classes: Vec<u8>,
    /// Row-major depth in `[0, 1]`.
    pub depth: Vec<f64>,
    pub tokens: Arc<Vec<u32>>,
}

impl Observation {
    /// One-hot semantic image `[H, W, C]`.
    pub fn semantic(&self) -> Tensor {
        let c = self.num_classes;
        let mut v = vec![0.0; self.classes.len() * c];
        for (i, &cls) in self.classes.iter().enumerate() {
            v[i * c + cls as usize] = 1.0;
        }
        Tensor::new(vec![self.height, self.width, c], v).expect("one-hot layout")
    }

    /// Depth image `[H, W]`.
    pub fn depth_tensor(&self) -> Tensor {
        Tensor::new(vec![self.height, self.width], self.depth.clone()).expect("depth layout")
    }
}

/// Renders one ray per column. Each column shows a vertically centred band
/// of the hit class with height `clamp(round(H / d⊥), 1, H)`, ceiling above
/// and floor below. Band depth is `d⊥ / d_max`; floor and ceiling depth
/// falls linearly from the band edge to 0 at the image border.
pub fn render_observation(house: &HouseMap, pose: &Pose, tokens: Arc<Vec<u32>>, config: &RenderConfig) -> Observation {
    let (w, h) = (config.width, config.height);
    let mut classes = vec![CLASS_FLOOR; w * h];
    let mut depth = vec![0.0; w * h];
    for col in 0..w {
        let offset = config.column_offset(col);
        let hit = raycast(house, pose, offset, config.max_distance);
        let perp = (hit.distance * offset.cos()).max(1e-9);
        let band = ((h as f64 / perp).round() as usize).clamp(1, h);
        let top = (h - band) / 2;
        let bottom = top + band;
        let band_depth = (perp / config.max_distance).min(1.0);
        for row in 0..h {
            let i = row * w + col;
            if row < top {
                classes[i] = CLASS_CEILING;
                depth[i] = band_depth * (row as f64 + 0.5) / top as f64;
            } else if row < bottom {
                classes[i] = hit.class_id;
                depth[i] = band_depth;
            } else {
                classes[i] = CLASS_FLOOR;
                depth[i] = band_depth * ((h - row) as f64 - 0.5) / (h - bottom) as f64;
            }
        }
    }
    Observation { height: h, width: w, num_classes: house.num_classes(), classes, depth, tokens }
}
