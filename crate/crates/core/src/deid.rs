//! De-identification: brain-preserving compositing of remodeled content, and
//! removal baselines.
//!
//! Coordinates follow `k0` inferior to superior, `k1` posterior to anterior
//! (the face looks toward `+k1`), `k2` left to right.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hull::{TriangleSelection, DEFAULT_TRIANGLES};
use crate::rng::Seed;
use crate::surface::{Sampling, SurfaceParams};
use crate::transform::{build_privacy_transform_with, PrivacyTransform};
use crate::volume::Volume;

/// `b∘x + (1−b)∘g`, exact on the brain.
pub fn composite(x: &Volume, b: &Volume, g: &Volume) -> Result<Volume> {
    x.same_dims(b)?;
    x.same_dims(g)?;
    if !b.is_mask() {
        return Err(Error::InvalidParams("brain must be a binary mask".into()));
    }
    let data = x
        .data()
        .iter()
        .zip(b.data())
        .zip(g.data())
        .map(|((&xv, &bv), &gv)| if bv == 1.0 { xv } else { gv })
        .collect();
    Volume::new(x.dims(), data)
}

/// Synthesizes a full-resolution head from a privacy transform.
pub trait Remodeler {
    fn remodel(&self, g: &PrivacyTransform, seed: Seed) -> Result<Volume>;
}

/// Non-learned remodeler: a depth-shaded tissue profile gated by the hull.
///
/// Inside the hull the intensity is `clamp(dt / shell_depth, 0, 1) * tissue`
/// plus seeded low-frequency noise, where `dt` is the city-block distance to
/// the nearest voxel outside the hull (the volume border counts as outside).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRemodel {
    pub tissue: f32,
    pub shell_depth: f32,
    pub noise_amplitude: f32,
}

impl Default for ReferenceRemodel {
    fn default() -> Self {
        Self { tissue: 0.8, shell_depth: 4.0, noise_amplitude: 0.03 }
    }
}

const NOISE_WAVES: usize = 4;

impl ReferenceRemodel {
    fn validate(&self) -> Result<()> {
        let ok = self.tissue > 0.0
            && self.tissue <= 1.0
            && self.shell_depth >= 1.0
            && self.noise_amplitude >= 0.0
            && self.noise_amplitude < self.tissue / self.shell_depth;
        if !ok {
            return Err(Error::InvalidParams(format!("bad remodel parameters {self:?}")));
        }
        Ok(())
    }

    /// The deterministic part of the profile, without noise.
    pub fn profile(&self, hull: &Volume) -> Result<Volume> {
        let dt = hull_depth(hull)?;
        Ok(dt.map(|d| (d / self.shell_depth).min(1.0) * self.tissue))
    }
}

impl Remodeler for ReferenceRemodel {
    fn remodel(&self, g: &PrivacyTransform, seed: Seed) -> Result<Volume> {
        self.validate()?;
        let hull = g.hull();
        let base = self.profile(hull)?;
        let noise = low_frequency_noise(hull.dims(), seed, NOISE_WAVES);
        let data = base
            .data()
            .iter()
            .zip(noise.data())
            .zip(hull.data())
            .map(|((&p, &n), &h)| if h == 1.0 { (p + self.noise_amplitude * n).clamp(0.0, 1.0) } else { 0.0 })
            .collect();
        Volume::new(hull.dims(), data)
    }
}

/// Returns an externally produced generator output unchanged.
#[derive(Clone, Debug)]
pub struct PrecomputedRemodel(pub Volume);

impl Remodeler for PrecomputedRemodel {
    fn remodel(&self, g: &PrivacyTransform, _seed: Seed) -> Result<Volume> {
        g.hull().same_dims(&self.0)?;
        Ok(self.0.clone())
    }
}

/// City-block distance from each set voxel to the nearest unset voxel or the
/// volume border; 0 outside the mask. Two-pass chamfer.
pub fn hull_depth(mask: &Volume) -> Result<Volume> {
    let [n0, n1, n2] = mask.dims();
    let inf = (n0 + n1 + n2) as u32;
    let mut d: Vec<u32> = mask.data().iter().map(|&v| if v == 1.0 { inf } else { 0 }).collect();
    let idx = |a: usize, b: usize, c: usize| (a * n1 + b) * n2 + c;
    for a in 0..n0 {
        for b in 0..n1 {
            for c in 0..n2 {
                let i = idx(a, b, c);
                if d[i] == 0 {
                    continue;
                }
                let pa = if a > 0 { d[idx(a - 1, b, c)] } else { 0 };
                let pb = if b > 0 { d[idx(a, b - 1, c)] } else { 0 };
                let pc = if c > 0 { d[idx(a, b, c - 1)] } else { 0 };
                d[i] = d[i].min(pa.min(pb).min(pc) + 1);
            }
        }
    }
    for a in (0..n0).rev() {
        for b in (0..n1).rev() {
            for c in (0..n2).rev() {
                let i = idx(a, b, c);
                if d[i] == 0 {
                    continue;
                }
                let na = if a + 1 < n0 { d[idx(a + 1, b, c)] } else { 0 };
                let nb = if b + 1 < n1 { d[idx(a, b + 1, c)] } else { 0 };
                let nc = if c + 1 < n2 { d[idx(a, b, c + 1)] } else { 0 };
                d[i] = d[i].min(na.min(nb).min(nc) + 1);
            }
        }
    }
    Volume::new(mask.dims(), d.into_iter().map(|v| v as f32).collect())
}

/// Smooth field in `[-1, 1]`: mean of a few random plane waves with
/// wavelengths between a quarter and the full volume extent.
pub fn low_frequency_noise(dims: [usize; 3], seed: Seed, waves: usize) -> Volume {
    use rand::Rng;
    let mut rng = seed.stream();
    let extent = *dims.iter().max().unwrap_or(&1) as f64;
    let params: Vec<([f64; 3], f64)> = (0..waves)
        .map(|_| {
            let wavelength = extent * rng.random_range(0.25..1.0);
            let dir: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
            let k = 2.0 * std::f64::consts::PI / wavelength / norm;
            (dir.map(|v| v * k), rng.random_range(0.0..2.0 * std::f64::consts::PI))
        })
        .collect();
    let w = waves.max(1) as f64;
    Volume::from_fn(dims, |p| {
        let s: f64 = params
            .iter()
            .map(|(k, phase)| (k[0] * p[0] as f64 + k[1] * p[1] as f64 + k[2] * p[2] as f64 + phase).sin())
            .sum();
        (s / w) as f32
    })
}

fn cross2(o: [i64; 2], a: [i64; 2], b: [i64; 2]) -> i64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull of 2D points without collinear vertices.
fn hull_2d(mut pts: Vec<[i64; 2]>) -> Vec<[i64; 2]> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[i64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross2(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[i64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross2(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Shear-plane defacing: zeroes everything in front of and below the brain.
///
/// The brain is projected onto the sagittal `(k0, k1)` plane; among the edges
/// of the projection's convex hull the one facing most directly toward
/// anterior-inferior defines the shear line, which is pushed out by `pad`
/// voxels. Voxels strictly beyond it are zeroed, so brain voxels never are.
pub fn quickshear_baseline(x: &Volume, b: &Volume, pad: f64) -> Result<Volume> {
    x.same_dims(b)?;
    if !(pad.is_finite() && pad >= 0.0) {
        return Err(Error::InvalidParams(format!("pad must be finite and non-negative, got {pad}")));
    }
    let [n0, n1, n2] = x.dims();
    let mut shadow = vec![false; n0 * n1];
    for (i, &v) in b.data().iter().enumerate() {
        if v == 1.0 {
            shadow[i / n2] = true;
        }
    }
    let pts: Vec<[i64; 2]> =
        (0..n0 * n1).filter(|&i| shadow[i]).map(|i| [(i / n1) as i64, (i % n1) as i64]).collect();
    if pts.is_empty() {
        return Err(Error::EmptyMask);
    }
    let hull = hull_2d(pts.clone());

    // outward normal of a CCW edge (p, q) is (dq1, -dq0); score against (-1, +1)
    let (normal, offset) = if hull.len() < 3 {
        let n = [-1i64, 1];
        (n, pts.iter().map(|p| n[0] * p[0] + n[1] * p[1]).max().unwrap())
    } else {
        let mut best: Option<(f64, [i64; 2], i64)> = None;
        for (i, &p) in hull.iter().enumerate() {
            let q = hull[(i + 1) % hull.len()];
            let n = [q[1] - p[1], p[0] - q[0]];
            let len = ((n[0] * n[0] + n[1] * n[1]) as f64).sqrt();
            let score = (n[1] - n[0]) as f64 / len;
            if best.is_none_or(|(s, _, _)| score > s) {
                best = Some((score, n, n[0] * p[0] + n[1] * p[1]));
            }
        }
        let (_, n, c) = best.unwrap();
        (n, c)
    };
    let limit = offset as f64 + pad * ((normal[0] * normal[0] + normal[1] * normal[1]) as f64).sqrt();

    let mut out = x.clone();
    let data = out.data_mut();
    for k0 in 0..n0 {
        for k1 in 0..n1 {
            if (normal[0] * k0 as i64 + normal[1] * k1 as i64) as f64 > limit {
                let row = (k0 * n1 + k1) * n2;
                data[row..row + n2].fill(0.0);
            }
        }
    }
    Ok(out)
}

/// Keeps only the brain: `b∘x`.
pub fn skull_strip_baseline(x: &Volume, b: &Volume) -> Result<Volume> {
    x.hadamard(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeidMethod {
    Remodel,
    #[serde(rename = "quickshear")]
    QuickshearLike,
    #[serde(rename = "skullstrip")]
    SkullStrip,
    Black,
    Original,
}

impl DeidMethod {
    pub const ALL: [DeidMethod; 5] =
        [DeidMethod::Original, DeidMethod::Black, DeidMethod::SkullStrip, DeidMethod::QuickshearLike, DeidMethod::Remodel];

    pub fn name(self) -> &'static str {
        match self {
            DeidMethod::Remodel => "remodel",
            DeidMethod::QuickshearLike => "quickshear",
            DeidMethod::SkullStrip => "skullstrip",
            DeidMethod::Black => "black",
            DeidMethod::Original => "original",
        }
    }
}

impl fmt::Display for DeidMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DeidMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DeidMethod::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParams(format!("unknown method {s:?}")))
    }
}

/// Knobs shared by all methods; the per-call seed drives every random step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeidParams {
    pub rotations: usize,
    /// Binarization threshold for the surface; `None` selects Otsu.
    pub delta: Option<f64>,
    pub point_cap: usize,
    /// Clipping triangles; `None` uses every hull triangle.
    pub triangles: Option<usize>,
    pub remodel: ReferenceRemodel,
    pub shear_pad: f64,
}

impl Default for DeidParams {
    fn default() -> Self {
        Self {
            rotations: 64,
            delta: None,
            point_cap: 10_000,
            triangles: Some(DEFAULT_TRIANGLES),
            remodel: ReferenceRemodel::default(),
            shear_pad: 2.0,
        }
    }
}

impl DeidParams {
    pub fn surface(&self, seed: Seed) -> SurfaceParams {
        SurfaceParams {
            rotations: self.rotations,
            delta: self.delta,
            seed: seed.derive_tag("transform"),
            point_cap: self.point_cap,
            sampling: Sampling::Bernoulli,
        }
    }

    pub fn selection(&self) -> TriangleSelection {
        self.triangles.map_or(TriangleSelection::All, TriangleSelection::Count)
    }

    pub fn transform(&self, x: &Volume, b: &Volume, seed: Seed) -> Result<PrivacyTransform> {
        build_privacy_transform_with(x, b, &self.surface(seed), self.selection())
    }
}

/// De-identifies `x` with the reference remodeler for REMODEL.
pub fn deidentify(x: &Volume, b: &Volume, method: DeidMethod, params: &DeidParams, seed: Seed) -> Result<Volume> {
    deidentify_with(x, b, method, params, seed, &params.remodel)
}

/// De-identifies `x`, using `remodeler` for REMODEL.
pub fn deidentify_with(
    x: &Volume,
    b: &Volume,
    method: DeidMethod,
    params: &DeidParams,
    seed: Seed,
    remodeler: &dyn Remodeler,
) -> Result<Volume> {
    x.same_dims(b)?;
    match method {
        DeidMethod::Original => Ok(x.clone()),
        DeidMethod::Black => Ok(Volume::zeros(x.dims())),
        DeidMethod::SkullStrip => skull_strip_baseline(x, b),
        DeidMethod::QuickshearLike => quickshear_baseline(x, b, params.shear_pad),
        DeidMethod::Remodel => {
            let g = params.transform(x, b, seed)?;
            remodel_transform(x, &g, remodeler, seed)
        }
    }
}

/// REMODEL output for an already built transform.
pub fn remodel_transform(x: &Volume, g: &PrivacyTransform, remodeler: &dyn Remodeler, seed: Seed) -> Result<Volume> {
    let synth = remodeler.remodel(g, seed.derive_tag("remodel"))?;
    composite(x, g.brain(), &synth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn ball(side: usize, center: [f64; 3], r: f64) -> Volume {
        Volume::from_fn([side; 3], |k| {
            let d2: f64 = (0..3).map(|i| (k[i] as f64 - center[i]).powi(2)).sum();
            if d2 <= r * r { 1.0 } else { 0.0 }
        })
    }

    fn random_volume(side: usize, seed: u64) -> Volume {
        let mut rng = Seed(seed).stream();
        Volume::from_fn([side; 3], |_| rng.random::<f32>())
    }

    #[test]
    fn composite_examples() {
        let x = random_volume(6, 1);
        let g = random_volume(6, 2);
        assert_eq!(composite(&x, &Volume::cube(6, 1.0), &g).unwrap(), x);
        assert_eq!(composite(&x, &Volume::cube(6, 0.0), &g).unwrap(), g);
        let b = random_volume(6, 3).map(|v| if v < 0.4 { 1.0 } else { 0.0 });
        let y = composite(&x, &b, &g).unwrap();
        let inv = b.map(|v| 1.0 - v);
        assert_eq!(y.hadamard(&b).unwrap(), x.hadamard(&b).unwrap());
        assert_eq!(y.hadamard(&inv).unwrap(), g.hadamard(&inv).unwrap());
        assert!(matches!(composite(&x, &Volume::cube(5, 1.0), &g), Err(Error::DimMismatch(..))));
    }

    fn depth_oracle(mask: &Volume) -> Volume {
        let [n0, n1, n2] = mask.dims();
        Volume::from_fn(mask.dims(), |k| {
            if mask.get(k) != 1.0 {
                return 0.0;
            }
            let mut best = [k[0] + 1, n0 - k[0], k[1] + 1, n1 - k[1], k[2] + 1, n2 - k[2]].into_iter().min().unwrap();
            for i in 0..mask.len() {
                if mask.data()[i] != 1.0 {
                    let q = mask.coords(i);
                    best = best.min((0..3).map(|a| k[a].abs_diff(q[a])).sum());
                }
            }
            best as f32
        })
    }

    #[test]
    fn chamfer_matches_exhaustive_distance() {
        for seed in 0..5 {
            let m = random_volume(7, seed).map(|v| if v < 0.8 { 1.0 } else { 0.0 });
            assert_eq!(hull_depth(&m).unwrap(), depth_oracle(&m));
        }
        let full = Volume::cube(5, 1.0);
        assert_eq!(hull_depth(&full).unwrap().get([2, 2, 2]), 3.0);
    }

    fn transform_of(hull: Volume) -> PrivacyTransform {
        let brain = Volume::zeros(hull.dims());
        PrivacyTransform::new(hull, brain.clone(), brain).unwrap()
    }

    #[test]
    fn reference_remodel_examples() {
        let r = ReferenceRemodel::default();
        let empty = transform_of(Volume::cube(8, 0.0));
        assert_eq!(r.remodel(&empty, Seed(0)).unwrap(), Volume::cube(8, 0.0));

        let full = transform_of(Volume::cube(16, 1.0));
        let y = r.remodel(&full, Seed(0)).unwrap();
        assert!(y.data().iter().all(|&v| v > 0.0 && v <= 1.0));
        let p = r.profile(full.hull()).unwrap();
        for k1 in 0..7 {
            assert!(p.get([8, k1, 8]) <= p.get([8, k1 + 1, 8]));
        }
        assert_eq!(p.get([8, 8, 8]), r.tissue);

        // averaging over seeds cancels the noise and leaves the profile
        let hull = ball(16, [7.5; 3], 6.0);
        let g = transform_of(hull.clone());
        let a = r.remodel(&g, Seed(1)).unwrap();
        let b = r.remodel(&g, Seed(2)).unwrap();
        assert_ne!(a, b);
        let profile = r.profile(&hull).unwrap();
        let n = 400;
        let mut mean = vec![0f64; hull.len()];
        for s in 0..n {
            for (m, v) in mean.iter_mut().zip(r.remodel(&g, Seed(100 + s)).unwrap().data()) {
                *m += *v as f64 / n as f64;
            }
        }
        let inside: Vec<usize> = (0..hull.len()).filter(|&i| hull.data()[i] == 1.0).collect();
        let corr = pearson(&inside.iter().map(|&i| mean[i]).collect::<Vec<_>>(), &inside.iter().map(|&i| profile.data()[i] as f64).collect::<Vec<_>>());
        assert!(corr > 0.99, "{corr}");
        for i in 0..hull.len() {
            let diff = (a.data()[i] - b.data()[i]).abs();
            assert!(diff <= 2.0 * r.noise_amplitude + 1e-6);
        }
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn quickshear_examples() {
        let x = random_volume(16, 4);
        let full = Volume::cube(16, 1.0);
        assert_eq!(quickshear_baseline(&x, &full, 0.0).unwrap(), x);
        assert!(matches!(quickshear_baseline(&x, &Volume::cube(16, 0.0), 1.0), Err(Error::EmptyMask)));

        let b = ball(16, [9.0, 6.0, 7.5], 4.0);
        let removed = |pad: f64| {
            let y = quickshear_baseline(&x, &b, pad).unwrap();
            (0..x.len()).filter(|&i| y.data()[i] != x.data()[i]).collect::<Vec<_>>()
        };
        let (r0, r2) = (removed(0.0), removed(2.0));
        assert!(!r2.is_empty());
        assert!(r2.iter().all(|i| r0.binary_search(i).is_ok()));
        assert!(r0.iter().all(|&i| b.data()[i] == 0.0));
        // the anterior-inferior corner goes, the posterior-superior one stays
        let y = quickshear_baseline(&x, &b, 2.0).unwrap();
        assert_eq!(y.get([0, 15, 5]), 0.0);
        assert_eq!(y.get([15, 0, 5]), x.get([15, 0, 5]));
    }

    #[test]
    fn skull_strip_examples() {
        let x = random_volume(6, 5).map(|v| if v < 0.3 { 0.0 } else { v });
        assert_eq!(skull_strip_baseline(&x, &Volume::cube(6, 1.0)).unwrap(), x);
        assert_eq!(skull_strip_baseline(&x, &Volume::cube(6, 0.0)).unwrap(), Volume::cube(6, 0.0));
        let b = ball(6, [2.5; 3], 2.0);
        let y = skull_strip_baseline(&x, &b).unwrap();
        for i in 0..x.len() {
            assert_eq!(y.data()[i] != 0.0, b.data()[i] == 1.0 && x.data()[i] > 0.0);
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in DeidMethod::ALL {
            assert_eq!(m.name().parse::<DeidMethod>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("deface".parse::<DeidMethod>().is_err());
    }

    #[test]
    fn deidentify_on_a_ball_head() {
        let side = 32;
        let head = ball(side, [15.5; 3], 12.0);
        let x = head.map(|v| if v == 1.0 { 0.8 } else { 0.02 });
        let b = ball(side, [15.5; 3], 6.0);
        let params = DeidParams { rotations: 16, delta: Some(0.3), ..Default::default() };
        let black = deidentify(&x, &b, DeidMethod::Black, &params, Seed(0)).unwrap();
        assert_eq!(black.count_nonzero(), 0);
        assert_eq!(deidentify(&x, &b, DeidMethod::Original, &params, Seed(0)).unwrap(), x);

        let y = deidentify(&x, &b, DeidMethod::Remodel, &params, Seed(7)).unwrap();
        assert_eq!(y, deidentify(&x, &b, DeidMethod::Remodel, &params, Seed(7)).unwrap());
        let g = params.transform(&x, &b, Seed(7)).unwrap();
        for i in 0..x.len() {
            if b.data()[i] == 1.0 {
                assert_eq!(y.data()[i].to_bits(), x.data()[i].to_bits());
            }
            if g.hull().data()[i] == 0.0 {
                assert_eq!(y.data()[i], 0.0);
            }
        }
        let gen = Volume::cube(side, 0.5);
        let z = deidentify_with(&x, &b, DeidMethod::Remodel, &params, Seed(7), &PrecomputedRemodel(gen.clone())).unwrap();
        assert_eq!(z, composite(&x, &b, &gen).unwrap());
    }
}
