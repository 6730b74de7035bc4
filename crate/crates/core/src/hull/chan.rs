//! Output-sensitive 3D hull in the style of Chan's algorithm.
//!
//! For a guess `m = 2^(2^t)` the points are split into groups of at most `m`,
//! each group gets its own sub-hull, and the global hull is gift-wrapped facet
//! by facet. Each wrapping step asks every group for its extreme point by
//! climbing the sub-hull's vertex graph. A wrap that discovers more than `m`
//! vertices is abandoned and the next guess is tried.
//!
//! Wrapping works on whole facets: the points coplanar with a newly found
//! supporting plane are collected, their planar hull gives the facet polygon,
//! and the polygon is fan-triangulated. Only true hull edges are ever wrapped
//! around, so coplanar input never produces overlapping triangulations and
//! only extreme points become vertices.

use std::collections::{HashMap, HashSet, VecDeque};

use super::incremental::{sub_hull, SubHull};
use super::{check_range, collinear, cross, dedup_sorted, dot, dot_wide, find_simplex, normal, orient, sub, Point3, TriMesh};
use crate::error::{Error, Result};

enum Group {
    Hull { hull: SubHull, cursor: usize },
    Flat(Vec<usize>),
}

/// Triangulated convex hull of `points`.
///
/// The vertex set is exactly the set of extreme points; points on hull faces
/// or edges are not vertices.
pub fn convex_hull(points: &[Point3]) -> Result<TriMesh> {
    check_range(points)?;
    let pts = dedup_sorted(points);
    if pts.len() < 4 {
        return Err(Error::TooFewPoints(pts.len()));
    }
    if find_simplex(&pts).is_none() {
        return Err(Error::DegenerateInput);
    }
    let n = pts.len();
    for t in 1u32.. {
        let m = if t >= 6 { n } else { (1usize << (1u32 << t)).min(n) };
        let mut groups: Vec<Group> = (0..n)
            .step_by(m)
            .map(|start| {
                let ids: Vec<usize> = (start..(start + m).min(n)).collect();
                match sub_hull(&pts, &ids) {
                    Some(hull) => Group::Hull { hull, cursor: 0 },
                    None => Group::Flat(ids),
                }
            })
            .collect();
        if let Some(mesh) = wrap(&pts, &mut groups, m)? {
            return Ok(mesh);
        }
        if m == n {
            break;
        }
    }
    unreachable!("wrapping with a single group cannot exceed the vertex budget")
}

/// Is `x` a better wrapping candidate than `c` around the directed edge `u -> v`?
#[inline]
fn better(pts: &[Point3], u: usize, v: usize, c: Option<usize>, x: usize) -> bool {
    if collinear(&pts[u], &pts[v], &pts[x]) {
        return false;
    }
    match c {
        None => true,
        Some(c) => orient(&pts[u], &pts[v], &pts[c], &pts[x]) > 0,
    }
}

impl Group {
    /// Point of this group that maximizes the wrapping angle around `u -> v`.
    fn extreme(&mut self, pts: &[Point3], u: usize, v: usize) -> Option<usize> {
        match self {
            Group::Flat(ids) => ids.iter().fold(None, |c, &x| if better(pts, u, v, c, x) { Some(x) } else { c }),
            Group::Hull { hull, cursor } => {
                let mut cur = *cursor;
                if collinear(&pts[u], &pts[v], &pts[hull.ids[cur]]) {
                    cur = (0..hull.ids.len()).find(|&i| !collinear(&pts[u], &pts[v], &pts[hull.ids[i]]))?;
                }
                'climb: loop {
                    for &nb in &hull.neighbors[cur] {
                        if better(pts, u, v, Some(hull.ids[cur]), hull.ids[nb]) {
                            cur = nb;
                            continue 'climb;
                        }
                    }
                    break;
                }
                *cursor = cur;
                Some(hull.ids[cur])
            }
        }
    }

    /// Points of this group on the plane through `origin` with normal `nrm`,
    /// given that the whole group lies on or below it.
    fn on_plane(&self, pts: &[Point3], origin: &Point3, nrm: [i64; 3], start: Option<usize>, out: &mut Vec<usize>) {
        let on = |i: usize| dot(nrm, sub(&pts[i], origin)) == 0;
        match self {
            Group::Flat(ids) => out.extend(ids.iter().copied().filter(|&i| on(i))),
            Group::Hull { hull, .. } => {
                let Some(start) = start.and_then(|s| hull.ids.iter().position(|&i| i == s)) else {
                    return;
                };
                if !on(hull.ids[start]) {
                    return;
                }
                let mut seen = vec![false; hull.ids.len()];
                let mut stack = vec![start];
                seen[start] = true;
                while let Some(cur) = stack.pop() {
                    out.push(hull.ids[cur]);
                    for &nb in &hull.neighbors[cur] {
                        if !seen[nb] && on(hull.ids[nb]) {
                            seen[nb] = true;
                            stack.push(nb);
                        }
                    }
                }
            }
        }
    }
}

/// Counter-clockwise (seen from the tip of `nrm`) strict convex polygon of
/// coplanar points.
fn planar_hull(pts: &[Point3], ids: &[usize], nrm: [i64; 3]) -> Vec<usize> {
    let drop = (0..3).max_by_key(|&a| nrm[a].abs()).unwrap();
    let (ax, ay) = match drop {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    };
    // (ax, ay, drop) is a cyclic permutation, so the projection keeps
    // orientation when nrm[drop] > 0
    let mut v: Vec<usize> = ids.to_vec();
    v.sort_unstable_by_key(|&i| (pts[i].0[ax], pts[i].0[ay]));
    v.dedup();
    let turn = |o: usize, a: usize, b: usize| -> i128 {
        let (o, a, b) = (&pts[o].0, &pts[a].0, &pts[b].0);
        (a[ax] - o[ax]) as i128 * (b[ay] - o[ay]) as i128 - (a[ay] - o[ay]) as i128 * (b[ax] - o[ax]) as i128
    };
    if v.len() < 3 {
        return v;
    }
    let mut hull: Vec<usize> = Vec::with_capacity(2 * v.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 { Box::new(v.iter()) } else { Box::new(v.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if nrm[drop] < 0 {
        hull.reverse();
    }
    hull
}

struct Wrapper<'a> {
    pts: &'a [Point3],
    triangles: Vec<[usize; 3]>,
    edges: HashSet<(usize, usize)>,
    pending: VecDeque<(usize, usize)>,
    vertices: HashSet<usize>,
}

impl Wrapper<'_> {
    fn add_facet(&mut self, polygon: &[usize]) -> Result<()> {
        if polygon.len() < 3 {
            return Err(Error::DegenerateInput);
        }
        for i in 1..polygon.len() - 1 {
            self.triangles.push([polygon[0], polygon[i], polygon[i + 1]]);
        }
        for i in 0..polygon.len() {
            let (p, q) = (polygon[i], polygon[(i + 1) % polygon.len()]);
            self.edges.insert((p, q));
            self.pending.push_back((q, p));
            self.vertices.insert(p);
        }
        Ok(())
    }
}

/// Gift-wraps the hull over `groups`; `Ok(None)` once more than `budget`
/// vertices have been found.
fn wrap(pts: &[Point3], groups: &mut [Group], budget: usize) -> Result<Option<TriMesh>> {
    let mut w = Wrapper {
        pts,
        triangles: Vec::new(),
        edges: HashSet::new(),
        pending: VecDeque::new(),
        vertices: HashSet::new(),
    };
    let first = first_facet(pts, groups)?;
    w.add_facet(&first)?;

    while let Some((u, v)) = w.pending.pop_front() {
        if w.edges.contains(&(u, v)) {
            continue;
        }
        let mut best: Option<usize> = None;
        let mut group_best = Vec::with_capacity(groups.len());
        for g in groups.iter_mut() {
            let e = g.extreme(pts, u, v);
            if let Some(x) = e {
                if better(pts, u, v, best, x) {
                    best = Some(x);
                }
            }
            group_best.push(e);
        }
        let c = best.ok_or(Error::DegenerateInput)?;
        let nrm = normal(&pts[u], &pts[v], &pts[c]);
        let mut coplanar = vec![u, v];
        for (g, start) in groups.iter().zip(group_best) {
            g.on_plane(pts, &pts[u], nrm, start, &mut coplanar);
        }
        let polygon = planar_hull(pts, &coplanar, nrm);
        debug_assert!(
            (0..polygon.len()).any(|i| polygon[i] == u && polygon[(i + 1) % polygon.len()] == v),
            "wrapped edge missing from facet"
        );
        w.add_facet(&polygon)?;
        if w.vertices.len() > budget {
            return Ok(None);
        }
        if w.triangles.len() > 2 * pts.len() {
            return Err(Error::DegenerateInput);
        }
    }

    let mut ids: Vec<usize> = w.vertices.into_iter().collect();
    ids.sort_unstable();
    let slot: HashMap<usize, usize> = ids.iter().enumerate().map(|(s, &i)| (i, s)).collect();
    let vertices = ids.iter().map(|&i| w.pts[i]).collect();
    let triangles = w.triangles.iter().map(|t| t.map(|i| slot[&i])).collect();
    TriMesh::new(vertices, triangles).map(Some)
}

/// A first hull facet, found from the lexicographically smallest point.
fn first_facet(pts: &[Point3], groups: &mut [Group]) -> Result<Vec<usize>> {
    // pts is sorted, so pts[0] is the lexicographic minimum and extreme
    let p0 = 0;
    let o = &pts[p0];
    // 2D wrap in the (x, y) projection: all projected points end up on the
    // left of or on the line p0 -> p1
    let cross_xy = |a: usize, b: usize| -> i64 {
        let (da, db) = (sub(&pts[a], o), sub(&pts[b], o));
        da[0] * db[1] - da[1] * db[0]
    };
    let mut p1: Option<usize> = None;
    for (x, q) in pts.iter().enumerate().skip(1) {
        if q.0[0] == o.0[0] && q.0[1] == o.0[1] {
            continue;
        }
        if p1.is_none_or(|c| cross_xy(c, x) < 0) {
            p1 = Some(x);
        }
    }
    let p1 = p1.ok_or(Error::DegenerateInput)?;
    let d = sub(&pts[p1], o);
    let nrm = [d[1], -d[0], 0];
    let face: Vec<usize> = (0..pts.len()).filter(|&i| dot(nrm, sub(&pts[i], o)) == 0).collect();

    let flat = face.iter().all(|&i| collinear(o, &pts[p1], &pts[i]));
    if !flat {
        return Ok(planar_hull(pts, &face, nrm));
    }
    // the supporting plane touches a single hull edge: wrap around it
    let dir = sub(&pts[p1], o);
    let along = |i: usize| dot_wide(dir, sub(&pts[i], o));
    let a = *face.iter().min_by_key(|&&i| along(i)).unwrap();
    let b = *face.iter().max_by_key(|&&i| along(i)).unwrap();
    let mut best = None;
    let mut group_best = Vec::new();
    for g in groups.iter_mut() {
        let e = g.extreme(pts, a, b);
        if let Some(x) = e {
            if better(pts, a, b, best, x) {
                best = Some(x);
            }
        }
        group_best.push(e);
    }
    let c = best.ok_or(Error::DegenerateInput)?;
    let nrm = cross(sub(&pts[b], &pts[a]), sub(&pts[c], &pts[a]));
    let mut coplanar = vec![a, b];
    for (g, start) in groups.iter().zip(group_best) {
        g.on_plane(pts, &pts[a], nrm, start, &mut coplanar);
    }
    Ok(planar_hull(pts, &coplanar, nrm))
}

#[cfg(test)]
mod tests {
    use super::super::brute_force_hull;
    use super::*;
    use crate::rng::Seed;
    use rand::Rng;

    fn cube_corners(s: i64) -> Vec<Point3> {
        let mut v = Vec::new();
        for x in [0, s] {
            for y in [0, s] {
                for z in [0, s] {
                    v.push(Point3::new(x, y, z));
                }
            }
        }
        v
    }

    #[test]
    fn tetrahedron() {
        let pts = vec![Point3::new(0, 0, 0), Point3::new(1, 0, 0), Point3::new(0, 1, 0), Point3::new(0, 0, 1)];
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.vertices().len(), 4);
        assert_eq!(h.triangles().len(), 4);
    }

    #[test]
    fn cube_with_interior_and_face_points() {
        let mut rng = Seed(4).stream();
        let mut pts = cube_corners(63);
        for _ in 0..50 {
            pts.push(Point3::new(rng.random_range(1..63), rng.random_range(1..63), rng.random_range(1..63)));
        }
        // points on faces and edges are not extreme
        pts.push(Point3::new(0, 10, 20));
        pts.push(Point3::new(63, 0, 5));
        pts.push(Point3::new(30, 63, 63));
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.vertex_set(), dedup_sorted(&cube_corners(63)));
        assert_eq!(h.triangles().len(), 12);
    }

    #[test]
    fn degenerate_inputs() {
        let flat: Vec<Point3> = (0..100).map(|i| Point3::new(i % 10, i / 10, 3)).collect();
        assert!(matches!(convex_hull(&flat), Err(Error::DegenerateInput)));
        let line: Vec<Point3> = (0..10).map(|i| Point3::new(i, 2 * i, 3 * i)).collect();
        assert!(matches!(convex_hull(&line), Err(Error::DegenerateInput)));
        assert!(matches!(convex_hull(&line[..3]), Err(Error::TooFewPoints(3))));
        let dup = vec![Point3::new(1, 1, 1); 6];
        assert!(matches!(convex_hull(&dup), Err(Error::TooFewPoints(1))));
    }

    #[test]
    fn matches_brute_force_on_small_grids() {
        // small coordinate range forces many coplanar and collinear ties
        let mut rng = Seed(8).stream();
        for trial in 0..200 {
            let n = rng.random_range(4..40);
            let r = if trial % 2 == 0 { 3 } else { 20 };
            let pts: Vec<Point3> = (0..n)
                .map(|_| Point3::new(rng.random_range(0..r), rng.random_range(0..r), rng.random_range(0..r)))
                .collect();
            match (convex_hull(&pts), brute_force_hull(&pts)) {
                (Ok(h), Ok(b)) => assert_eq!(h.vertex_set(), b, "trial {trial}"),
                (Err(Error::DegenerateInput), Err(Error::DegenerateInput)) => {}
                (Err(Error::TooFewPoints(_)), Err(Error::TooFewPoints(_))) => {}
                (a, b) => panic!("trial {trial}: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn large_sphere_cloud_uses_grouping() {
        let mut rng = Seed(12).stream();
        let pts: Vec<Point3> = (0..3000)
            .map(|_| {
                let v: [f64; 3] = [0; 3].map(|_| rng.random_range(-1.0..1.0));
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-9);
                let r = if rng.random_bool(0.5) { 30.0 } else { rng.random_range(0.0..30.0) };
                Point3(v.map(|c| (40.0 + r * c / n).round() as i64))
            })
            .collect();
        let h = convex_hull(&pts).unwrap();
        // every input point is inside or on every facet plane
        for t in 0..h.triangles().len() {
            let [a, b, c] = h.triangles()[t].map(|i| h.vertices()[i]);
            assert!(pts.iter().all(|p| orient(&a, &b, &c, p) <= 0));
        }
        // Euler characteristic of a closed triangulated sphere
        assert_eq!(h.triangles().len(), 2 * h.vertices().len() - 4);
    }
}
