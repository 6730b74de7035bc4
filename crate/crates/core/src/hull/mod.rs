//! Convex hulls of voxel point sets and their voxelization.
//!
//! Points carry integer voxel coordinates, which keeps every orientation
//! predicate exact: coordinates are bounded by [`MAX_COORD`], so 3x3
//! determinants fit in `i64` and in-plane tests in `i128`.

mod brute;
mod chan;
mod incremental;
mod voxelize;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use brute::brute_force_hull;
pub use chan::convex_hull;
pub use voxelize::{voxelize_hull, TriangleSelection, DEFAULT_TRIANGLES};

/// Largest coordinate magnitude accepted by the hull routines.
pub const MAX_COORD: i64 = 1 << 16;

/// Voxel index triple used as a geometric point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Point3(pub [i64; 3]);

impl Point3 {
    pub fn new(p0: i64, p1: i64, p2: i64) -> Self {
        Self([p0, p1, p2])
    }

    pub fn as_f64(&self) -> [f64; 3] {
        self.0.map(|v| v as f64)
    }
}

#[inline]
pub(crate) fn sub(a: &Point3, b: &Point3) -> [i64; 3] {
    [a.0[0] - b.0[0], a.0[1] - b.0[1], a.0[2] - b.0[2]]
}

#[inline]
pub(crate) fn cross(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub(crate) fn dot(a: [i64; 3], b: [i64; 3]) -> i64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn dot_wide(a: [i64; 3], b: [i64; 3]) -> i128 {
    a[0] as i128 * b[0] as i128 + a[1] as i128 * b[1] as i128 + a[2] as i128 * b[2] as i128
}

/// Sign of `((b - a) x (c - a)) . (d - a)`: positive when `d` lies on the
/// normal side of the counter-clockwise triangle `abc`.
#[inline]
pub(crate) fn orient(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> i64 {
    dot(cross(sub(b, a), sub(c, a)), sub(d, a)).signum()
}

/// Unnormalized normal of triangle `abc`.
#[inline]
pub(crate) fn normal(a: &Point3, b: &Point3, c: &Point3) -> [i64; 3] {
    cross(sub(b, a), sub(c, a))
}

#[inline]
pub(crate) fn collinear(a: &Point3, b: &Point3, c: &Point3) -> bool {
    normal(a, b, c) == [0, 0, 0]
}

pub(crate) fn check_range(points: &[Point3]) -> Result<()> {
    match points.iter().find(|p| p.0.iter().any(|v| v.abs() > MAX_COORD)) {
        Some(p) => Err(Error::InvalidParams(format!("point {:?} exceeds coordinate bound {MAX_COORD}", p.0))),
        None => Ok(()),
    }
}

/// Sorted, duplicate-free copy of `points`.
pub(crate) fn dedup_sorted(points: &[Point3]) -> Vec<Point3> {
    let mut v = points.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Indices of four affinely independent points, if any exist.
pub(crate) fn find_simplex(points: &[Point3]) -> Option<[usize; 4]> {
    let a = 0;
    let b = (1..points.len()).find(|&i| points[i] != points[a])?;
    let c = (0..points.len()).find(|&i| !collinear(&points[a], &points[b], &points[i]))?;
    let d = (0..points.len()).find(|&i| orient(&points[a], &points[b], &points[c], &points[i]) != 0)?;
    Some([a, b, c, d])
}

/// Closed triangulated convex surface with outward-facing triangles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
    centroid: [f64; 3],
}

impl TriMesh {
    /// Builds a mesh, checking index range, non-degeneracy, outward
    /// orientation and convexity.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::InvalidParams("mesh needs vertices and triangles".into()));
        }
        check_range(&vertices)?;
        let n = vertices.len() as f64;
        let centroid = vertices.iter().fold([0.0; 3], |mut acc, p| {
            for (c, &v) in acc.iter_mut().zip(&p.0) {
                *c += v as f64 / n;
            }
            acc
        });
        let mesh = Self { vertices, triangles, centroid };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        for t in &self.triangles {
            if t.iter().any(|&i| i >= self.vertices.len()) {
                return bad(format!("triangle {t:?} index out of range"));
            }
            let [a, b, c] = t.map(|i| &self.vertices[i]);
            let nrm = normal(a, b, c);
            if nrm == [0, 0, 0] {
                return bad(format!("triangle {t:?} is degenerate"));
            }
            let out: f64 = (0..3).map(|k| nrm[k] as f64 * (a.0[k] as f64 - self.centroid[k])).sum();
            if out <= 0.0 {
                return bad(format!("triangle {t:?} faces inward"));
            }
            if self.vertices.iter().any(|p| orient(a, b, c, p) > 0) {
                return bad(format!("triangle {t:?} violates convexity"));
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn centroid(&self) -> [f64; 3] {
        self.centroid
    }

    /// Outward normal of triangle `t`, oriented away from the centroid.
    pub fn outward_normal(&self, t: usize) -> [i64; 3] {
        let [a, b, c] = self.triangles[t].map(|i| &self.vertices[i]);
        let n = normal(a, b, c);
        let out: f64 = (0..3).map(|k| n[k] as f64 * (a.0[k] as f64 - self.centroid[k])).sum();
        if out < 0.0 {
            n.map(|v| -v)
        } else {
            n
        }
    }

    /// Sorted vertex coordinates.
    pub fn vertex_set(&self) -> Vec<Point3> {
        let mut v = self.vertices.clone();
        v.sort_unstable();
        v
    }
}
