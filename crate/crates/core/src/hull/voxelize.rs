//! Half-space clipping of a full volume by hull triangle planes.

use rand::seq::index;

use super::{dot, TriMesh};
use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::volume::Volume;

/// Number of clipping triangles used by the privacy transform.
pub const DEFAULT_TRIANGLES: usize = 100;

/// Which hull triangles clip the volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriangleSelection {
    All,
    /// Uniform sample without replacement; all triangles when the mesh has fewer.
    Count(usize),
}

/// Relative tolerance on the signed plane distance; voxel centers this close
/// to a plane count as inside.
const PLANE_TOLERANCE: f64 = 1e-6;

/// Binary hull volume: start from all ones and zero every voxel whose center
/// lies strictly on the outer side of a selected triangle's plane.
pub fn voxelize_hull(mesh: &TriMesh, side: usize, selection: TriangleSelection, seed: Seed) -> Result<Volume> {
    let n_tri = mesh.triangles().len();
    let chosen: Vec<usize> = match selection {
        TriangleSelection::All => (0..n_tri).collect(),
        TriangleSelection::Count(0) => return Err(Error::InvalidCount("triangle count must be positive".into())),
        TriangleSelection::Count(k) if k >= n_tri => (0..n_tri).collect(),
        TriangleSelection::Count(k) => {
            let mut v = index::sample(&mut seed.stream(), n_tri, k).into_vec();
            v.sort_unstable();
            v
        }
    };
    let max = side as i64 - 1;
    if mesh.vertices().iter().any(|p| p.0.iter().any(|&c| c < 0 || c > max)) {
        return Err(Error::InvalidParams(format!("mesh does not fit in a volume of side {side}")));
    }

    // keep voxel k iff n . (k - v0) <= floor(tol * S * |n|), evaluated exactly
    // in integers and solved per row for the k2 interval
    struct Plane {
        n: [i64; 3],
        offset: i64,
    }
    let planes: Vec<Plane> = chosen
        .iter()
        .map(|&t| {
            let n = mesh.outward_normal(t);
            let v0 = mesh.vertices()[mesh.triangles()[t][0]].0;
            let norm = (n.iter().map(|&c| (c as f64).powi(2)).sum::<f64>()).sqrt();
            let limit = (PLANE_TOLERANCE * side as f64 * norm).floor() as i64;
            Plane { n, offset: limit + dot(n, v0) }
        })
        .collect();

    let mut out = vec![0f32; side * side * side];
    for k0 in 0..side {
        for k1 in 0..side {
            let (mut lo, mut hi) = (0i64, max);
            for p in &planes {
                // n2 * k2 <= rhs
                let rhs = p.offset - p.n[0] * k0 as i64 - p.n[1] * k1 as i64;
                let n2 = p.n[2];
                if n2 > 0 {
                    hi = hi.min(rhs.div_euclid(n2));
                } else if n2 < 0 {
                    lo = lo.max(-(rhs.div_euclid(-n2)));
                } else if rhs < 0 {
                    hi = -1;
                }
                if lo > hi {
                    break;
                }
            }
            if lo <= hi {
                let row = (k0 * side + k1) * side;
                out[row + lo as usize..=row + hi as usize].fill(1.0);
            }
        }
    }
    Volume::new([side; 3], out)
}

#[cfg(test)]
mod tests {
    use super::super::{convex_hull, Point3};
    use super::*;
    use crate::rng::Seed;
    use rand::Rng;

    fn per_voxel_oracle(mesh: &TriMesh, side: usize, tris: &[usize]) -> Volume {
        let c = mesh.centroid();
        Volume::from_fn([side; 3], |k| {
            let inside = tris.iter().all(|&t| {
                let [a, b, d] = mesh.triangles()[t].map(|i| mesh.vertices()[i].as_f64());
                let e1 = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let e2 = [d[0] - a[0], d[1] - a[1], d[2] - a[2]];
                let mut n = [e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]];
                if (0..3).map(|i| n[i] * (a[i] - c[i])).sum::<f64>() < 0.0 {
                    n = n.map(|v| -v);
                }
                let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
                let dist: f64 = (0..3).map(|i| n[i] * (k[i] as f64 - a[i])).sum::<f64>() / len;
                dist <= 1e-6 * side as f64
            });
            if inside { 1.0 } else { 0.0 }
        })
    }

    #[test]
    fn full_cube_keeps_everything() {
        let s = 12;
        let m = (s - 1) as i64;
        let mut pts = Vec::new();
        for x in [0, m] {
            for y in [0, m] {
                for z in [0, m] {
                    pts.push(Point3::new(x, y, z));
                }
            }
        }
        let mesh = convex_hull(&pts).unwrap();
        let v = voxelize_hull(&mesh, s, TriangleSelection::All, Seed(0)).unwrap();
        assert_eq!(v.count_set(), s * s * s);
    }

    #[test]
    fn single_plane_matches_direct_evaluation() {
        let pts = vec![Point3::new(2, 3, 1), Point3::new(13, 4, 2), Point3::new(5, 14, 3), Point3::new(6, 7, 12)];
        let mesh = convex_hull(&pts).unwrap();
        for seed in 0..8 {
            let got = voxelize_hull(&mesh, 16, TriangleSelection::Count(1), Seed(seed)).unwrap();
            let chosen = index::sample(&mut Seed(seed).stream(), 4, 1).into_vec();
            assert_eq!(got, per_voxel_oracle(&mesh, 16, &chosen));
        }
        let all = voxelize_hull(&mesh, 16, TriangleSelection::All, Seed(0)).unwrap();
        assert_eq!(all, per_voxel_oracle(&mesh, 16, &[0, 1, 2, 3]));
    }

    #[test]
    fn random_hulls_match_oracle_and_are_monotone() {
        let mut rng = Seed(31).stream();
        for trial in 0..10 {
            let pts: Vec<Point3> = (0..30)
                .map(|_| Point3::new(rng.random_range(2..22), rng.random_range(2..22), rng.random_range(2..22)))
                .collect();
            let mesh = convex_hull(&pts).unwrap();
            let all = voxelize_hull(&mesh, 24, TriangleSelection::All, Seed(trial)).unwrap();
            let idx: Vec<usize> = (0..mesh.triangles().len()).collect();
            assert_eq!(all, per_voxel_oracle(&mesh, 24, &idx));
            for p in &pts {
                assert_eq!(all.get(p.0.map(|c| c as usize)), 1.0);
            }
            let few = voxelize_hull(&mesh, 24, TriangleSelection::Count(5), Seed(trial)).unwrap();
            assert_eq!(all.count_outside(&few).unwrap(), 0, "clipping more never adds voxels");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let pts = vec![Point3::new(0, 0, 0), Point3::new(9, 0, 0), Point3::new(0, 9, 0), Point3::new(0, 0, 9)];
        let mesh = convex_hull(&pts).unwrap();
        assert!(matches!(voxelize_hull(&mesh, 10, TriangleSelection::Count(0), Seed(0)), Err(Error::InvalidCount(_))));
        assert!(voxelize_hull(&mesh, 8, TriangleSelection::All, Seed(0)).is_err());
    }
}
