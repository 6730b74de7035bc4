//! Depth-shaded orthographic renderings of head surfaces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    /// Looking at the face, rays travel toward `-k1`.
    Frontal,
    /// From the `k2 = 0` side, rays travel toward `+k2`.
    Left,
    /// From the `k2 = S-1` side, rays travel toward `-k2`.
    Right,
}

/// Square image, row-major, top row superior.
#[derive(Clone, Debug, PartialEq)]
pub struct Rendering {
    pub view: View,
    pub width: usize,
    pub pixels: Vec<f32>,
}

impl Rendering {
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    pub fn count_nonzero(&self) -> usize {
        self.pixels.iter().filter(|&&v| v != 0.0).count()
    }

    /// Binary PGM with values scaled to 0..=255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.width).into_bytes();
        out.extend(self.pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }
}

/// First voxel with `x >= delta` along each ray; pixel `1 - depth/S`, misses 0.
pub fn render_face(x: &Volume, delta: f64, view: View) -> Result<Rendering> {
    let s = x.side()?;
    if !delta.is_finite() {
        return Err(Error::InvalidThreshold(delta));
    }
    let mut pixels = vec![0f32; s * s];
    for row in 0..s {
        let k0 = s - 1 - row;
        for col in 0..s {
            let hit = (0..s).find(|&depth| {
                let k = match view {
                    View::Frontal => [k0, s - 1 - depth, col],
                    View::Left => [k0, col, depth],
                    View::Right => [k0, s - 1 - col, s - 1 - depth],
                };
                x.get(k) as f64 >= delta
            });
            if let Some(depth) = hit {
                pixels[row * s + col] = 1.0 - depth as f32 / s as f32;
            }
        }
    }
    Ok(Rendering { view, width: s, pixels })
}
