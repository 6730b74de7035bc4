//! Exhaustive hull oracle for small point sets.

use std::collections::HashSet;

use super::{check_range, dedup_sorted, dot_wide, normal, sub, Point3};
use crate::error::{Error, Result};

/// Largest input accepted by [`brute_force_hull`].
pub const BRUTE_FORCE_LIMIT: usize = 60;

/// Extreme points of `points`, sorted, found by enumerating every point
/// triple as a candidate supporting plane.
///
/// A point is extreme iff it lies on some supporting plane and is not in the
/// convex hull of the other points on that plane.
pub fn brute_force_hull(points: &[Point3]) -> Result<Vec<Point3>> {
    check_range(points)?;
    let pts = dedup_sorted(points);
    let n = pts.len();
    if n < 4 {
        return Err(Error::TooFewPoints(n));
    }
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::InvalidCount(format!("brute force hull takes at most {BRUTE_FORCE_LIMIT} points, got {n}")));
    }
    let side = |nrm: [i64; 3], o: &Point3, p: &Point3| dot_wide(nrm, sub(p, o)).signum();

    let mut extreme = vec![false; n];
    let mut seen_planes = HashSet::new();
    let mut any_plane = false;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let nrm = normal(&pts[i], &pts[j], &pts[k]);
                if nrm == [0, 0, 0] {
                    continue;
                }
                let signs: Vec<i128> = pts.iter().map(|p| side(nrm, &pts[i], p)).collect();
                any_plane |= signs.iter().any(|&s| s != 0);
                let supporting = signs.iter().all(|&s| s <= 0) || signs.iter().all(|&s| s >= 0);
                if !supporting {
                    continue;
                }
                let on: Vec<usize> = (0..n).filter(|&q| signs[q] == 0).collect();
                if !seen_planes.insert(on.clone()) {
                    continue;
                }
                for &c in &on {
                    if !extreme[c] && !in_planar_hull(&pts, c, &on, nrm) {
                        extreme[c] = true;
                    }
                }
            }
        }
    }
    if !any_plane {
        return Err(Error::DegenerateInput);
    }
    Ok((0..n).filter(|&i| extreme[i]).map(|i| pts[i]).collect())
}

/// Is `pts[c]` in the convex hull of the other coplanar points `on`?
fn in_planar_hull(pts: &[Point3], c: usize, on: &[usize], nrm: [i64; 3]) -> bool {
    let others: Vec<usize> = on.iter().copied().filter(|&q| q != c).collect();
    let p = &pts[c];
    // signed area of (a, b, p) measured along the plane normal
    let area = |a: usize, b: usize| dot_wide(normal(&pts[a], &pts[b], p), nrm).signum();
    for (x, &a) in others.iter().enumerate() {
        for &b in &others[x + 1..] {
            let (da, db) = (sub(&pts[a], p), sub(&pts[b], p));
            if normal(&pts[a], &pts[b], p) == [0, 0, 0] && dot_wide(da, db) <= 0 {
                return true;
            }
        }
    }
    for (x, &a) in others.iter().enumerate() {
        for (y, &b) in others.iter().enumerate().skip(x + 1) {
            for &d in &others[y + 1..] {
                if normal(&pts[a], &pts[b], &pts[d]) == [0, 0, 0] {
                    continue;
                }
                let s = [area(a, b), area(b, d), area(d, a)];
                if s.iter().all(|&v| v >= 0) || s.iter().all(|&v| v <= 0) {
                    return true;
                }
            }
        }
    }
    false
}
