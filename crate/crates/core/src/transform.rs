//! The privacy transform `(hull, brain, brain intensities)` and its
//! multi-resolution pyramid.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hull::{convex_hull, voxelize_hull, TriangleSelection, DEFAULT_TRIANGLES};
use crate::io::{read_volume, write_volume};
use crate::rng::Seed;
use crate::surface::{sample_surface_points, surface_representation, SurfaceParams};
use crate::volume::Volume;

/// Sampling attempts before giving up on a degenerate surface draw.
pub const TRANSFORM_ATTEMPTS: usize = 3;

/// Conditioning triple for the remodeler. Holds no scan intensity outside the
/// brain mask.
#[derive(Clone, Debug, PartialEq)]
pub struct PrivacyTransform {
    hull: Volume,
    brain: Volume,
    brain_intensities: Volume,
}

impl PrivacyTransform {
    /// Checks shapes, binarity, `brain ⊆ hull` and that intensities vanish
    /// outside the brain.
    pub fn new(hull: Volume, brain: Volume, brain_intensities: Volume) -> Result<Self> {
        hull.side()?;
        hull.same_dims(&brain)?;
        hull.same_dims(&brain_intensities)?;
        if !hull.is_mask() || !brain.is_mask() {
            return Err(Error::InvalidParams("hull and brain must be binary masks".into()));
        }
        let outside = brain.count_outside(&hull)?;
        if outside > 0 {
            return Err(Error::BrainOutsideHull(outside));
        }
        if brain.data().iter().zip(brain_intensities.data()).any(|(&b, &v)| b == 0.0 && v != 0.0) {
            return Err(Error::InvalidParams("brain intensities outside the brain mask".into()));
        }
        Ok(Self { hull, brain, brain_intensities })
    }

    pub fn hull(&self) -> &Volume {
        &self.hull
    }

    pub fn brain(&self) -> &Volume {
        &self.brain
    }

    pub fn brain_intensities(&self) -> &Volume {
        &self.brain_intensities
    }

    pub fn side(&self) -> usize {
        self.hull.dims()[0]
    }

    /// Writes `<prefix>.hull.vol`, `<prefix>.brain.vol`, `<prefix>.brainint.vol`.
    pub fn write(&self, prefix: impl AsRef<Path>) -> Result<()> {
        let [h, b, i] = gamma_paths(prefix.as_ref());
        write_volume(&self.hull, h)?;
        write_volume(&self.brain, b)?;
        write_volume(&self.brain_intensities, i)
    }

    pub fn read(prefix: impl AsRef<Path>) -> Result<Self> {
        let [h, b, i] = gamma_paths(prefix.as_ref());
        Self::new(read_volume(h)?, read_volume(b)?, read_volume(i)?)
    }
}

pub fn gamma_paths(prefix: &Path) -> [PathBuf; 3] {
    let s = prefix.as_os_str().to_string_lossy();
    ["hull", "brain", "brainint"].map(|k| PathBuf::from(format!("{s}.{k}.vol")))
}

/// Privacy transform with the default clipping-triangle count.
pub fn build_privacy_transform(x: &Volume, brain: &Volume, p: &SurfaceParams) -> Result<PrivacyTransform> {
    build_privacy_transform_with(x, brain, p, TriangleSelection::Count(DEFAULT_TRIANGLES))
}

/// Builds `(c(x), b, b∘x)`.
///
/// The hull depends on `x` only through `1[x >= delta]`. With `p.delta`
/// unset, `delta` itself is the Otsu threshold of `x`, so callers that need
/// strict invariance to intensities should pin it.
pub fn build_privacy_transform_with(
    x: &Volume,
    brain: &Volume,
    p: &SurfaceParams,
    selection: TriangleSelection,
) -> Result<PrivacyTransform> {
    let side = x.side()?;
    x.same_dims(brain)?;
    if !brain.is_mask() {
        return Err(Error::InvalidParams("brain must be a binary mask".into()));
    }
    if brain.count_set() == 0 {
        return Err(Error::EmptyMask);
    }
    let z = surface_representation(x, p)?;

    let mut last = None;
    for attempt in 0..TRANSFORM_ATTEMPTS {
        let seed = if attempt == 0 { p.seed } else { p.seed.derive(attempt as u64) };
        let hull = sample_surface_points(&z, p.sampling, seed.derive_tag("points"), p.point_cap)
            .and_then(|pts| convex_hull(&pts))
            .and_then(|mesh| voxelize_hull(&mesh, side, selection, seed.derive_tag("clip")));
        match hull {
            Ok(hull) => return PrivacyTransform::new(hull, brain.clone(), brain.hadamard(x)?),
            Err(e @ (Error::EmptySurface | Error::DegenerateInput | Error::TooFewPoints(_))) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::TransformFailed { attempts: TRANSFORM_ATTEMPTS, last: Box::new(last.unwrap()) })
}

fn check_factor(dims: [usize; 3], factor: usize) -> Result<()> {
    if factor == 0 {
        return Err(Error::InvalidParams("downsampling factor must be positive".into()));
    }
    if dims.iter().any(|&d| d % factor != 0) {
        let out = dims.map(|d| d / factor * factor);
        return Err(Error::DimMismatch(dims, out));
    }
    Ok(())
}

/// Block mean over `factor³` blocks.
pub fn average_downsample(x: &Volume, factor: usize) -> Result<Volume> {
    check_factor(x.dims(), factor)?;
    if factor == 1 {
        return Ok(x.clone());
    }
    let od = x.dims().map(|d| d / factor);
    let mut sums = vec![0f64; od[0] * od[1] * od[2]];
    for (i, &v) in x.data().iter().enumerate() {
        let k = x.coords(i);
        sums[((k[0] / factor) * od[1] + k[1] / factor) * od[2] + k[2] / factor] += v as f64;
    }
    let n = (factor * factor * factor) as f64;
    Volume::new(od, sums.into_iter().map(|s| (s / n) as f32).collect())
}

/// One factor-2 Bernoulli pooling step for several masks driven by the same
/// uniform draws, so `a ⊆ b` before implies `a ⊆ b` after.
fn bernoulli_halve(masks: &[&Volume], seed: Seed) -> Result<Vec<Volume>> {
    let means: Vec<Volume> = masks.iter().map(|m| average_downsample(m, 2)).collect::<Result<_>>()?;
    Ok(means
        .into_iter()
        .map(|mu| {
            let data = mu
                .data()
                .iter()
                .enumerate()
                .map(|(i, &p)| if seed.uniform_at(i as u64) < p as f64 { 1.0 } else { 0.0 })
                .collect();
            Volume::new(mu.dims(), data).expect("same dims")
        })
        .collect())
}

fn log2_exact(n: usize) -> Option<u32> {
    (n.is_power_of_two()).then(|| n.trailing_zeros())
}

/// Binary downsampling by `factor` (a power of two): each output voxel is
/// Bernoulli with the block mean as parameter, applied as repeated factor-2
/// steps. The expected set fraction equals the input set fraction.
pub fn probabilistic_downsample(m: &Volume, factor: usize, seed: Seed) -> Result<Volume> {
    check_factor(m.dims(), factor)?;
    let steps = log2_exact(factor)
        .ok_or_else(|| Error::InvalidParams(format!("factor {factor} is not a power of two")))?;
    if !m.is_mask() {
        return Err(Error::InvalidParams("probabilistic downsampling expects a binary mask".into()));
    }
    let mut cur = m.clone();
    for step in 0..steps {
        cur = bernoulli_halve(&[&cur], seed.derive(step as u64))?.pop().unwrap();
    }
    Ok(cur)
}

/// Multi-scale copies of a privacy transform, coarsest first.
#[derive(Clone, Debug)]
pub struct Pyramid {
    levels: Vec<PrivacyTransform>,
}

impl Pyramid {
    pub fn levels(&self) -> &[PrivacyTransform] {
        &self.levels
    }

    pub fn sides(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.side()).collect()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Writes level `k` (1-based, coarsest first) as `<prefix>.L<k>.*.vol`.
    pub fn write(&self, prefix: impl AsRef<Path>) -> Result<()> {
        let s = prefix.as_ref().as_os_str().to_string_lossy().into_owned();
        for (k, level) in self.levels.iter().enumerate() {
            level.write(format!("{s}.L{}", k + 1))?;
        }
        Ok(())
    }
}

/// Number of pyramid levels, `log2(side / min_side) + 1`.
pub fn level_count(side: usize, min_side: usize) -> Result<usize> {
    let bad = || Error::InvalidScale { side, min_side };
    let (a, b) = (log2_exact(side).ok_or_else(bad)?, log2_exact(min_side).ok_or_else(bad)?);
    if b > a {
        return Err(bad());
    }
    Ok((a - b) as usize + 1)
}

/// Pyramid with sides `min_side * 2^(k-1)` for `k = 1..=N`.
///
/// Masks shrink by coupled factor-2 Bernoulli pooling (hull and brain share
/// draws, keeping the brain inside the hull); intensities by block averaging.
pub fn build_pyramid(g: &PrivacyTransform, min_side: usize, seed: Seed) -> Result<Pyramid> {
    let n = level_count(g.side(), min_side)?;
    let mut levels = vec![g.clone()];
    for k in (1..n).rev() {
        let finer = levels.last().unwrap();
        let mut masks = bernoulli_halve(&[&finer.hull, &finer.brain], seed.derive(k as u64))?;
        let brain = masks.pop().unwrap();
        let hull = masks.pop().unwrap();
        let brain_intensities = average_downsample(&finer.brain_intensities, 2)?;
        levels.push(PrivacyTransform { hull, brain, brain_intensities });
    }
    levels.reverse();
    Ok(Pyramid { levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::Sampling;

    fn ball(side: usize, r: f64, value: f32) -> Volume {
        let c = (side as f64 - 1.0) / 2.0;
        Volume::from_fn([side; 3], |k| {
            let d2: f64 = k.iter().map(|&v| (v as f64 - c).powi(2)).sum();
            if d2 <= r * r { value } else { 0.0 }
        })
    }

    #[test]
    fn average_examples() {
        let c = Volume::cube(4, 0.25);
        assert_eq!(average_downsample(&c, 2).unwrap(), Volume::cube(2, 0.25));
        let seq = Volume::from_fn([2; 3], |k| (k[0] * 4 + k[1] * 2 + k[2]) as f32);
        assert_eq!(average_downsample(&seq, 2).unwrap().data(), &[3.5]);
        assert_eq!(average_downsample(&seq, 1).unwrap(), seq);
        assert!(matches!(average_downsample(&Volume::cube(3, 0.0), 2), Err(Error::DimMismatch(..))));
    }

    #[test]
    fn probabilistic_examples() {
        assert_eq!(probabilistic_downsample(&Volume::cube(4, 1.0), 2, Seed(0)).unwrap(), Volume::cube(2, 1.0));
        assert_eq!(probabilistic_downsample(&Volume::cube(4, 0.0), 4, Seed(0)).unwrap(), Volume::cube(1, 0.0));
        let half = Volume::from_fn([2; 3], |k| if k[0] == 0 { 1.0 } else { 0.0 });
        let mean = (0..10_000)
            .map(|s| probabilistic_downsample(&half, 2, Seed(s)).unwrap().data()[0] as f64)
            .sum::<f64>()
            / 10_000.0;
        assert!((0.48..=0.52).contains(&mean), "{mean}");
        assert!(probabilistic_downsample(&Volume::cube(4, 1.0), 3, Seed(0)).is_err());
        assert!(probabilistic_downsample(&Volume::cube(6, 1.0), 4, Seed(0)).is_err());
    }

    #[test]
    fn level_counts() {
        assert_eq!(level_count(128, 4).unwrap(), 6);
        assert_eq!(level_count(64, 4).unwrap(), 5);
        assert_eq!(level_count(32, 8).unwrap(), 3);
        assert_eq!(level_count(32, 32).unwrap(), 1);
        assert!(matches!(level_count(48, 4), Err(Error::InvalidScale { .. })));
        assert!(matches!(level_count(32, 64), Err(Error::InvalidScale { .. })));
    }

    #[test]
    fn pyramid_keeps_brain_in_hull() {
        let hull = ball(32, 14.0, 1.0);
        let brain = ball(32, 8.0, 1.0);
        let x = ball(32, 8.0, 0.6);
        let g = PrivacyTransform::new(hull, brain.clone(), brain.hadamard(&x).unwrap()).unwrap();
        let p = build_pyramid(&g, 4, Seed(3)).unwrap();
        assert_eq!(p.sides(), vec![4, 8, 16, 32]);
        assert_eq!(p.levels()[3], g);
        for l in p.levels() {
            assert!(l.hull().is_mask() && l.brain().is_mask());
            assert_eq!(l.brain().count_outside(l.hull()).unwrap(), 0);
            assert!(l.brain_intensities().min() >= 0.0 && l.brain_intensities().max() <= 0.6);
        }
        let single = build_pyramid(&g, 32, Seed(3)).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.levels()[0], g);
    }

    #[test]
    fn transform_on_concentric_balls() {
        let side = 32;
        let x = ball(side, 12.0, 0.8);
        let b = ball(side, 6.0, 1.0);
        let p = SurfaceParams { rotations: 32, delta: Some(0.4), seed: Seed(1), ..Default::default() };
        let g = build_privacy_transform_with(&x, &b, &p, TriangleSelection::All).unwrap();
        let expected = 4.0 / 3.0 * std::f64::consts::PI * 12f64.powi(3);
        let rel = (g.hull().count_set() as f64 - expected).abs() / expected;
        assert!(rel < 0.05, "hull volume off by {rel}");
        assert_eq!(g.brain(), &b);
        for i in 0..x.len() {
            let want = if b.data()[i] == 1.0 { x.data()[i] } else { 0.0 };
            assert_eq!(g.brain_intensities().data()[i], want);
        }
        assert!(matches!(build_privacy_transform(&x, &Volume::cube(side, 0.0), &p), Err(Error::EmptyMask)));
    }

    #[test]
    fn empty_scan_fails_after_retries() {
        let x = Volume::cube(16, 0.0);
        let b = ball(16, 3.0, 1.0);
        let p = SurfaceParams { rotations: 2, delta: Some(0.5), sampling: Sampling::Bernoulli, ..Default::default() };
        assert!(matches!(build_privacy_transform(&x, &b, &p), Err(Error::TransformFailed { attempts: 3, .. })));
    }

    #[test]
    fn brain_outside_hull_is_rejected() {
        let hull = ball(16, 4.0, 1.0);
        let brain = ball(16, 6.0, 1.0);
        assert!(matches!(
            PrivacyTransform::new(hull, brain.clone(), brain.clone()),
            Err(Error::BrainOutsideHull(_))
        ));
    }

    #[test]
    fn gamma_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let hull = ball(8, 3.5, 1.0);
        let brain = ball(8, 2.0, 1.0);
        let g = PrivacyTransform::new(hull, brain.clone(), brain.map(|v| v * 0.5)).unwrap();
        let prefix = dir.path().join("subj");
        g.write(&prefix).unwrap();
        assert!(dir.path().join("subj.brainint.vol").exists());
        assert_eq!(PrivacyTransform::read(&prefix).unwrap(), g);
        build_pyramid(&g, 2, Seed(0)).unwrap().write(&prefix).unwrap();
        assert!(dir.path().join("subj.L1.hull.vol").exists());
        assert!(dir.path().join("subj.L3.brain.vol").exists());
    }
}
