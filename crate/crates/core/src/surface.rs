//! Probabilistic head-surface estimation by axis-aligned ray casting under
//! random rotations.
//!
//! For every rotation the binarized scan is rotated, the first set voxel along
//! each grid line is recorded from all six axis directions, the six hit maps
//! are averaged, and the result is rotated back. The mean over all rotations
//! gives a per-voxel surface probability `Z`.

use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hull::Point3;
use crate::rng::Seed;
use crate::rotation::{rotate_mask, rotate_nearest, sample_uniform_rotation, Rotation};
use crate::volume::{binarize, default_threshold, Volume};

/// How surface points are drawn from `Z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sampling {
    /// Independent Bernoulli draw per voxel with parameter `Z[k]`.
    Bernoulli,
    /// Deterministic `Z[k] >= t`.
    Threshold(f32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceParams {
    /// Number of random rotations.
    pub rotations: usize,
    /// Binarization threshold; `None` selects Otsu over nonzero voxels.
    pub delta: Option<f64>,
    pub seed: Seed,
    pub point_cap: usize,
    pub sampling: Sampling,
}

impl Default for SurfaceParams {
    fn default() -> Self {
        Self { rotations: 64, delta: None, seed: Seed(0), point_cap: 10_000, sampling: Sampling::Bernoulli }
    }
}

impl SurfaceParams {
    pub fn validate(&self) -> Result<()> {
        if self.rotations < 1 {
            return Err(Error::InvalidCount("rotation count must be >= 1".into()));
        }
        if self.point_cap < 4 {
            return Err(Error::InvalidCount("point cap must be >= 4".into()));
        }
        if let Some(d) = self.delta {
            if !d.is_finite() {
                return Err(Error::InvalidThreshold(d));
            }
        }
        Ok(())
    }

    /// The threshold actually applied to `x`.
    pub fn threshold_for(&self, x: &Volume) -> Result<f64> {
        match self.delta {
            Some(d) => Ok(d),
            None => default_threshold(x),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Neg,
    Pos,
}

/// Ray entry side: axis `a` and direction `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AxisDirection {
    axis: usize,
    dir: Direction,
}

impl AxisDirection {
    pub const ALL: [AxisDirection; 6] = [
        AxisDirection { axis: 0, dir: Direction::Neg },
        AxisDirection { axis: 0, dir: Direction::Pos },
        AxisDirection { axis: 1, dir: Direction::Neg },
        AxisDirection { axis: 1, dir: Direction::Pos },
        AxisDirection { axis: 2, dir: Direction::Neg },
        AxisDirection { axis: 2, dir: Direction::Pos },
    ];

    pub fn new(axis: usize, dir: Direction) -> Result<Self> {
        if axis > 2 {
            return Err(Error::InvalidParams(format!("axis {axis} not in 0..=2")));
        }
        Ok(Self { axis, dir })
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn dir(&self) -> Direction {
        self.dir
    }
}

/// Distance of voxel `k` from the entry face: `(S-1) - k_a` for `d = +1`,
/// `k_a` otherwise.
pub fn zeta(ad: AxisDirection, k: [usize; 3], side: usize) -> Result<usize> {
    if k.iter().any(|&v| v >= side) {
        return Err(Error::IndexOutOfRange { index: k, side });
    }
    Ok(match ad.dir {
        Direction::Pos => side - 1 - k[ad.axis],
        Direction::Neg => k[ad.axis],
    })
}

/// Calls `hit(index)` for the first set voxel of every line along `ad.axis`
/// when entering from side `ad.dir`.
fn for_each_first_hit(m: &[f32], side: usize, ad: AxisDirection, mut hit: impl FnMut(usize)) {
    let stride = [side * side, side, 1];
    let along = stride[ad.axis];
    let (o1, o2) = match ad.axis {
        0 => (stride[1], stride[2]),
        1 => (stride[0], stride[2]),
        _ => (stride[0], stride[1]),
    };
    for u in 0..side {
        for v in 0..side {
            let base = u * o1 + v * o2;
            let found = match ad.dir {
                Direction::Neg => (0..side).map(|s| base + s * along).find(|&i| m[i] == 1.0),
                Direction::Pos => (0..side).rev().map(|s| base + s * along).find(|&i| m[i] == 1.0),
            };
            if let Some(i) = found {
                hit(i);
            }
        }
    }
}

/// Marks the voxel whose `zeta` is minimal among the set voxels of its line.
pub fn intersection_map(m: &Volume, ad: AxisDirection) -> Result<Volume> {
    let side = m.side()?;
    let mut out = vec![0f32; m.len()];
    for_each_first_hit(m.data(), side, ad, |i| out[i] = 1.0);
    Volume::new(m.dims(), out)
}

/// Number of directions (0..=6) from which each voxel is the first hit.
fn hit_counts(m: &Volume) -> Result<Vec<u8>> {
    let side = m.side()?;
    let mut counts = vec![0u8; m.len()];
    for ad in AxisDirection::ALL {
        for_each_first_hit(m.data(), side, ad, |i| counts[i] += 1);
    }
    Ok(counts)
}

/// Mean of the six intersection maps.
pub fn directional_average(m: &Volume) -> Result<Volume> {
    let counts = hit_counts(m)?;
    Volume::new(m.dims(), counts.into_iter().map(|c| c as f32 / 6.0).collect())
}

/// Surface probability map `Z` from `p.rotations` uniformly random rotations.
pub fn surface_representation(x: &Volume, p: &SurfaceParams) -> Result<Volume> {
    p.validate()?;
    let rotations: Vec<Rotation> = (0..p.rotations as u64)
        .map(|i| sample_uniform_rotation(&mut p.seed.derive(i).stream()))
        .collect();
    surface_representation_with(x, p.threshold_for(x)?, &rotations)
}

/// `Z` for an explicit rotation list.
///
/// Per-rotation hit counts are accumulated as integers, so the result does
/// not depend on the order in which rotations are evaluated.
pub fn surface_representation_with(x: &Volume, delta: f64, rotations: &[Rotation]) -> Result<Volume> {
    x.side()?;
    if rotations.is_empty() {
        return Err(Error::InvalidCount("rotation count must be >= 1".into()));
    }
    let m = binarize(x, delta)?;
    if m.count_set() == 0 {
        return Ok(Volume::zeros(x.dims()));
    }
    let total = rotations
        .par_iter()
        .map(|r| -> Result<Vec<u32>> {
            let rotated = rotate_mask(&m, r, false)?;
            let counts = hit_counts(&rotated)?;
            let counts = Volume::new(m.dims(), counts.into_iter().map(f32::from).collect())?;
            let back = rotate_nearest(&counts, r, true)?;
            Ok(back.data().iter().map(|&c| c as u32).collect())
        })
        .try_reduce(
            || vec![0u32; m.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let denom = 6.0 * rotations.len() as f64;
    Volume::new(x.dims(), total.into_iter().map(|c| (c as f64 / denom) as f32).collect())
}

/// Draws surface points from `z`, at most `cap` of them.
///
/// Bernoulli draws are keyed by voxel index so they do not depend on
/// iteration order; an oversized draw is reduced to a uniform random subset.
pub fn sample_surface_points(z: &Volume, sampling: Sampling, seed: Seed, cap: usize) -> Result<Vec<Point3>> {
    if cap < 1 {
        return Err(Error::InvalidCount("point cap must be >= 1".into()));
    }
    if z.data().iter().all(|&v| v <= 0.0) {
        return Err(Error::EmptySurface);
    }
    let draw = seed.derive_tag("bernoulli");
    let picked: Vec<usize> = z
        .data()
        .iter()
        .enumerate()
        .filter(|&(i, &p)| match sampling {
            Sampling::Bernoulli => p > 0.0 && draw.uniform_at(i as u64) < p as f64,
            Sampling::Threshold(t) => p > 0.0 && p >= t,
        })
        .map(|(i, _)| i)
        .collect();
    if picked.is_empty() {
        return Err(Error::EmptySurface);
    }
    let picked = if picked.len() > cap {
        let mut keep = index::sample(&mut seed.derive_tag("subsample").stream(), picked.len(), cap).into_vec();
        keep.sort_unstable();
        keep.into_iter().map(|j| picked[j]).collect()
    } else {
        picked
    };
    Ok(picked
        .into_iter()
        .map(|i| {
            let k = z.coords(i);
            Point3([k[0] as i64, k[1] as i64, k[2] as i64])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(side: usize, lo: usize, hi: usize) -> Volume {
        Volume::from_fn([side; 3], |k| if k.iter().all(|&v| (lo..=hi).contains(&v)) { 1.0 } else { 0.0 })
    }

    #[test]
    fn zeta_examples() {
        let pos0 = AxisDirection::new(0, Direction::Pos).unwrap();
        let neg2 = AxisDirection::new(2, Direction::Neg).unwrap();
        let neg1 = AxisDirection::new(1, Direction::Neg).unwrap();
        assert_eq!(zeta(pos0, [5, 3, 9], 128).unwrap(), 122);
        assert_eq!(zeta(neg2, [5, 3, 9], 128).unwrap(), 9);
        assert_eq!(zeta(neg1, [0, 0, 0], 128).unwrap(), 0);
        assert!(matches!(zeta(neg1, [0, 128, 0], 128), Err(Error::IndexOutOfRange { .. })));
        assert!(AxisDirection::new(3, Direction::Pos).is_err());
    }

    #[test]
    fn lone_voxel_is_hit_from_every_side() {
        let mut m = Volume::cube(4, 0.0);
        m.set([1, 2, 3], 1.0);
        for ad in AxisDirection::ALL {
            assert_eq!(intersection_map(&m, ad).unwrap(), m);
        }
        let avg = directional_average(&m).unwrap();
        assert_eq!(avg.get([1, 2, 3]), 1.0);
        assert_eq!(avg.sum(), 1.0);
    }

    #[test]
    fn block_face_from_low_side() {
        let m = block(4, 1, 2);
        let map = intersection_map(&m, AxisDirection::new(0, Direction::Neg).unwrap()).unwrap();
        assert_eq!(map.count_set(), 4);
        for k1 in 1..=2 {
            for k2 in 1..=2 {
                assert_eq!(map.get([1, k1, k2]), 1.0);
            }
        }
        let avg = directional_average(&m).unwrap();
        assert_eq!(avg.get([1, 1, 1]), 0.5);
        assert_eq!(avg.get([2, 2, 2]), 0.5);
    }

    #[test]
    fn interior_is_occluded() {
        let avg = directional_average(&block(8, 2, 5)).unwrap();
        assert_eq!(avg.get([3, 3, 3]), 0.0);
        assert_eq!(avg.get([4, 3, 4]), 0.0);
        assert!(avg.get([2, 3, 3]) > 0.0);
    }

    #[test]
    fn empty_inputs() {
        let m = Volume::cube(5, 0.0);
        for ad in AxisDirection::ALL {
            assert_eq!(intersection_map(&m, ad).unwrap().count_set(), 0);
        }
        let p = SurfaceParams { rotations: 4, delta: Some(0.5), ..Default::default() };
        assert_eq!(surface_representation(&m, &p).unwrap().sum(), 0.0);
        assert!(matches!(
            sample_surface_points(&m, Sampling::Bernoulli, Seed(0), 100),
            Err(Error::EmptySurface)
        ));
        assert!(matches!(intersection_map(&Volume::zeros([3, 3, 4]), AxisDirection::ALL[0]), Err(Error::NonCubicVolume(_))));
    }

    #[test]
    fn identity_rotation_collapses_to_directional_average() {
        let x = Volume::from_fn([10; 3], |k| if k[0] >= 2 && k[0] <= 6 && k[1] >= 3 && k[2] <= 4 { 0.9 } else { 0.0 });
        let z = surface_representation_with(&x, 0.5, &[Rotation::IDENTITY]).unwrap();
        let expected = directional_average(&binarize(&x, 0.5).unwrap()).unwrap();
        assert_eq!(z, expected);
    }

    #[test]
    fn surface_is_seed_deterministic() {
        let x = block(16, 4, 11);
        let p = SurfaceParams { rotations: 6, delta: Some(0.5), seed: Seed(42), ..Default::default() };
        let a = surface_representation(&x, &p).unwrap();
        let b = surface_representation(&x, &p).unwrap();
        assert_eq!(a, b);
        assert!(a.is_probability());
        // zero wherever the mask is zero is only guaranteed before back-rotation,
        // but all mass must lie on or next to the block
        for i in 0..a.len() {
            if a.data()[i] > 0.0 {
                let k = a.coords(i);
                assert!(k.iter().all(|&v| (3..=12).contains(&v)), "{k:?}");
            }
        }
    }

    #[test]
    fn bernoulli_one_returns_exact_points() {
        let mut z = Volume::cube(6, 0.0);
        let pts = [[0, 0, 0], [1, 2, 3], [5, 5, 5], [2, 2, 2], [4, 0, 1]];
        for p in pts {
            z.set(p, 1.0);
        }
        let got = sample_surface_points(&z, Sampling::Bernoulli, Seed(9), 10_000).unwrap();
        let mut got: Vec<[i64; 3]> = got.into_iter().map(|p| p.0).collect();
        got.sort();
        let mut want: Vec<[i64; 3]> = pts.iter().map(|p| p.map(|v| v as i64)).collect();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn bernoulli_half_count_in_band() {
        let z = Volume::new([10, 10, 10], vec![0.5; 1000]).unwrap();
        for s in 0..50 {
            let n = sample_surface_points(&z, Sampling::Bernoulli, Seed(s), 10_000).unwrap().len();
            assert!((400..=600).contains(&n), "{n}");
        }
    }

    #[test]
    fn cap_and_threshold_modes() {
        let z = Volume::new([10, 10, 10], vec![0.5; 1000]).unwrap();
        let capped = sample_surface_points(&z, Sampling::Bernoulli, Seed(1), 37).unwrap();
        assert_eq!(capped.len(), 37);
        assert_eq!(capped, sample_surface_points(&z, Sampling::Bernoulli, Seed(1), 37).unwrap());
        let all = sample_surface_points(&z, Sampling::Threshold(0.5), Seed(1), 10_000).unwrap();
        assert_eq!(all.len(), 1000);
        assert!(matches!(
            sample_surface_points(&z, Sampling::Threshold(0.6), Seed(1), 10_000),
            Err(Error::EmptySurface)
        ));
    }
}
