//! Incremental 3D hull used for the sub-hulls of the grouped wrapping pass.
//!
//! The result is a triangulated convex surface. It may keep a few points
//! that lie on a face or edge of the true hull; the wrapping pass only needs
//! a convex vertex graph to climb on, so those are harmless.

use std::collections::HashSet;

use super::{find_simplex, orient, Point3};

/// Convex sub-hull as a vertex graph over global point ids.
#[derive(Debug)]
pub(crate) struct SubHull {
    pub ids: Vec<usize>,
    pub neighbors: Vec<Vec<usize>>,
}

/// Hull of `points[ids]`; `None` when the points are coplanar.
pub(crate) fn sub_hull(points: &[Point3], ids: &[usize]) -> Option<SubHull> {
    let local: Vec<Point3> = ids.iter().map(|&i| points[i]).collect();
    let [a, b, c, d] = find_simplex(&local)?;
    let mut faces: Vec<[usize; 3]> = if orient(&local[a], &local[b], &local[c], &local[d]) > 0 {
        vec![[a, c, b], [a, b, d], [b, c, d], [c, a, d]]
    } else {
        vec![[a, b, c], [a, d, b], [b, d, c], [c, d, a]]
    };
    let seed = [a, b, c, d];

    for p in 0..local.len() {
        if seed.contains(&p) {
            continue;
        }
        let q = &local[p];
        let signs: Vec<i64> = faces.iter().map(|f| orient(&local[f[0]], &local[f[1]], &local[f[2]], q)).collect();
        if signs.iter().all(|&s| s <= 0) {
            continue;
        }
        let mut visible_edges = HashSet::new();
        for (f, &s) in faces.iter().zip(&signs) {
            if s >= 0 {
                for e in 0..3 {
                    visible_edges.insert((f[e], f[(e + 1) % 3]));
                }
            }
        }
        let mut next = Vec::with_capacity(faces.len() + 8);
        for (f, &s) in faces.iter().zip(&signs) {
            if s < 0 {
                next.push(*f);
            } else {
                for e in 0..3 {
                    let (u, v) = (f[e], f[(e + 1) % 3]);
                    if !visible_edges.contains(&(v, u)) {
                        next.push([u, v, p]);
                    }
                }
            }
        }
        faces = next;
    }

    let mut used: Vec<usize> = faces.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let mut slot = vec![usize::MAX; local.len()];
    for (s, &u) in used.iter().enumerate() {
        slot[u] = s;
    }
    let mut neighbors = vec![Vec::new(); used.len()];
    for f in &faces {
        for e in 0..3 {
            let (u, v) = (slot[f[e]], slot[f[(e + 1) % 3]]);
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
    }
    for n in &mut neighbors {
        n.sort_unstable();
        n.dedup();
    }
    Some(SubHull { ids: used.into_iter().map(|u| ids[u]).collect(), neighbors })
}
