//! Rotations of cubic volumes about their center.

use std::ops::Mul;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::volume::Volume;

/// Unit quaternion `(w, x, y, z)`; axes `x, y, z` correspond to voxel axes
/// `k0, k1, k2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Normalizes `(w, x, y, z)`; returns `None` for a (near) zero quaternion.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Option<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return None;
        }
        Some(Self { w: w / n, x: x / n, y: y / n, z: z / n })
    }

    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Option<Self> {
        let n = (axis[0].powi(2) + axis[1].powi(2) + axis[2].powi(2)).sqrt();
        if n < 1e-12 {
            return None;
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Self::from_quaternion(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n)
    }

    pub fn quaternion(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn inverse(&self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        2.0 * self.w.abs().min(1.0).acos()
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let Rotation { w, x, y, z } = *self;
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = self.matrix();
        [0, 1, 2].map(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2])
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    /// Hamilton product: `(a * b).apply(v) == a.apply(b.apply(v))`.
    fn mul(self, b: Rotation) -> Rotation {
        let a = self;
        Rotation {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }
}

/// Draws a rotation uniformly from SO(3) by normalizing a 4D standard normal.
pub fn sample_uniform_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    loop {
        let q: [f64; 4] = [0; 4].map(|_| rng.sample(StandardNormal));
        if let Some(r) = Rotation::from_quaternion(q[0], q[1], q[2], q[3]) {
            return r;
        }
    }
}

/// Nearest-neighbor rotation of a mask about the volume center `(S-1)/2`.
///
/// Sources falling outside the grid read as 0. With `inverse` set the
/// rotation applied is `r^-1`.
pub fn rotate_mask(m: &Volume, r: &Rotation, inverse: bool) -> Result<Volume> {
    rotate_nearest(m, r, inverse)
}

/// Nearest-neighbor rotation for any cubic volume; values are copied, never
/// interpolated.
pub fn rotate_nearest(v: &Volume, r: &Rotation, inverse: bool) -> Result<Volume> {
    let side = v.side()?;
    if *r == Rotation::IDENTITY {
        return Ok(v.clone());
    }
    // output[k] = input[M (k - c) + c] with M the inverse of the applied rotation
    let m = if inverse { r.matrix() } else { r.inverse().matrix() };
    let c = (side as f64 - 1.0) / 2.0;
    let n = side as i64;
    let src = v.data();
    let mut out = vec![0f32; v.len()];
    let mut i = 0;
    for k0 in 0..side {
        let d0 = k0 as f64 - c;
        for k1 in 0..side {
            let d1 = k1 as f64 - c;
            let base = [0, 1, 2].map(|row| m[row][0] * d0 + m[row][1] * d1 + c);
            for k2 in 0..side {
                let d2 = k2 as f64 - c;
                let s0 = (base[0] + m[0][2] * d2).round() as i64;
                let s1 = (base[1] + m[1][2] * d2).round() as i64;
                let s2 = (base[2] + m[2][2] * d2).round() as i64;
                if (0..n).contains(&s0) && (0..n).contains(&s1) && (0..n).contains(&s2) {
                    out[i] = src[((s0 * n + s1) * n + s2) as usize];
                }
                i += 1;
            }
        }
    }
    Volume::new(v.dims(), out)
}
