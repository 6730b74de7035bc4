//! Synthetic head phantoms with ground-truth brain masks.
//!
//! A phantom is an ellipsoidal head (soft tissue over a skull shell over a
//! textured brain with a central ventricle) plus identity-specific nose, brow
//! and jaw geometry, in the `k0` up, `k1` forward, `k2` left-to-right frame.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::deid::low_frequency_noise;
use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::volume::Volume;

pub const SOFT_TISSUE: f32 = 0.8;
pub const SOFT_TISSUE_RANGE: (f32, f32) = (0.65, 0.95);
pub const SKULL: f32 = 0.2;
pub const BRAIN: f32 = 0.6;
pub const BRAIN_RANGE: (f32, f32) = (0.52, 0.68);
pub const VENTRICLE: f32 = 0.42;

/// Normalized ellipsoid radii of the tissue boundaries.
const BRAIN_RADIUS: f64 = 0.72;
const SKULL_RADIUS: f64 = 0.84;
const VENTRICLE_RADIUS: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomParams {
    pub side: usize,
    /// Head semi-axes along `(k0, k1, k2)`, each within `[side/5, side/3]`.
    pub head_axes: [f64; 3],
    /// Relative per-identity head scaling in `[-jitter, jitter]`; 0 keeps
    /// every head the same size.
    pub head_size_jitter: f64,
    pub background_mean: f64,
    pub background_sd: f64,
    pub ranges: IdentityRanges,
}

/// Sampling ranges of the identity features, as fractions of the volume side
/// unless noted.
///
/// By default the head outline (size and jaw) is shared by all identities, so
/// identity lives in the face; widening `jaw_width` or setting a head-size
/// jitter lets outline differences through, which the convex hull preserves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityRanges {
    pub nose_length: (f64, f64),
    /// Below the head center, as a fraction of the vertical semi-axis.
    pub nose_drop: (f64, f64),
    pub nose_width: (f64, f64),
    pub brow_depth: (f64, f64),
    /// Relative width of the chin.
    pub jaw_width: (f64, f64),
    pub eye_spacing: (f64, f64),
    pub eye_depth: (f64, f64),
    pub mouth_width: (f64, f64),
    pub mouth_depth: (f64, f64),
}

impl Default for IdentityRanges {
    fn default() -> Self {
        Self {
            nose_length: (0.04, 0.09),
            nose_drop: (0.05, 0.3),
            nose_width: (0.035, 0.06),
            brow_depth: (0.0, 0.03),
            jaw_width: (1.0, 1.0),
            eye_spacing: (0.16, 0.24),
            eye_depth: (0.02, 0.05),
            mouth_width: (0.12, 0.2),
            mouth_depth: (0.01, 0.03),
        }
    }
}

impl IdentityRanges {
    /// Hard limits that keep every feature clear of the brain.
    const LIMITS: [(&'static str, (f64, f64)); 9] = [
        ("nose_length", (0.0, 0.1)),
        ("nose_drop", (0.0, 0.5)),
        ("nose_width", (0.0, 0.1)),
        ("brow_depth", (0.0, 0.05)),
        ("jaw_width", (0.85, 1.1)),
        ("eye_spacing", (0.1, 0.3)),
        ("eye_depth", (0.0, 0.06)),
        ("mouth_width", (0.0, 0.25)),
        ("mouth_depth", (0.0, 0.04)),
    ];

    fn all(&self) -> [(f64, f64); 9] {
        [
            self.nose_length,
            self.nose_drop,
            self.nose_width,
            self.brow_depth,
            self.jaw_width,
            self.eye_spacing,
            self.eye_depth,
            self.mouth_width,
            self.mouth_depth,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for ((name, (lo, hi)), (a, b)) in Self::LIMITS.iter().zip(self.all()) {
            if !(a <= b && *lo <= a && b <= *hi) {
                return Err(Error::InvalidPhantomParams(format!("{name} range ({a}, {b}) outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

fn draw(rng: &mut impl Rng, (a, b): (f64, f64)) -> f64 {
    if a < b { rng.random_range(a..b) } else { a }
}

impl PhantomParams {
    pub fn for_side(side: usize) -> Self {
        let s = side as f64;
        Self {
            side,
            head_axes: [0.32 * s, 0.30 * s, 0.27 * s],
            head_size_jitter: 0.0,
            background_mean: 0.05,
            background_sd: 0.01,
            ranges: IdentityRanges::default(),
        }
    }

    pub fn axis_bounds(&self) -> (f64, f64) {
        (self.side as f64 / 5.0, self.side as f64 / 3.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidPhantomParams(what));
        if self.side < 16 {
            return bad(format!("side {} below 16", self.side));
        }
        let (lo, hi) = self.axis_bounds();
        if self.head_axes.iter().any(|&a| !(lo..=hi).contains(&a)) {
            return bad(format!("head axes {:?} outside [{lo}, {hi}]", self.head_axes));
        }
        if !(0.0..=0.25).contains(&self.head_size_jitter) {
            return bad(format!("head size jitter {} outside [0, 0.25]", self.head_size_jitter));
        }
        if !(0.0..=0.2).contains(&self.background_mean) || !(0.0..=0.05).contains(&self.background_sd) {
            return bad("background level must stay well below tissue".into());
        }
        self.ranges.validate()
    }
}

impl Default for PhantomParams {
    fn default() -> Self {
        Self::for_side(64)
    }
}

/// Face-identity descriptor. Lengths are in voxels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Identity {
    pub head_axes: [f64; 3],
    pub nose_length: f64,
    /// Vertical offset of the nose from the head center (negative is lower).
    pub nose_height: f64,
    pub nose_width: f64,
    pub brow_depth: f64,
    /// Scale of the left-right axis at the chin.
    pub jaw_width: f64,
    pub eye_spacing: f64,
    pub eye_depth: f64,
    pub mouth_width: f64,
    pub mouth_depth: f64,
    pub texture_seed: u64,
}

impl Identity {
    pub fn sample(seed: Seed, params: &PhantomParams) -> Self {
        let mut rng = seed.stream();
        let s = params.side as f64;
        let (lo, hi) = params.axis_bounds();
        let scale = 1.0 + params.head_size_jitter * rng.random_range(-1.0..=1.0);
        let head_axes = params.head_axes.map(|a| (a * scale).clamp(lo, hi));
        let r = &params.ranges;
        Self {
            head_axes,
            nose_length: s * draw(&mut rng, r.nose_length),
            nose_height: -head_axes[0] * draw(&mut rng, r.nose_drop),
            nose_width: s * draw(&mut rng, r.nose_width),
            brow_depth: s * draw(&mut rng, r.brow_depth),
            jaw_width: draw(&mut rng, r.jaw_width),
            eye_spacing: s * draw(&mut rng, r.eye_spacing),
            eye_depth: s * draw(&mut rng, r.eye_depth),
            mouth_width: s * draw(&mut rng, r.mouth_width),
            mouth_depth: s * draw(&mut rng, r.mouth_depth),
            texture_seed: rng.random(),
        }
    }

    fn validate(&self, params: &PhantomParams) -> Result<()> {
        let s = params.side as f64;
        let (lo, hi) = params.axis_bounds();
        let within = |v: f64, i: usize, scale: f64| {
            let (a, b) = IdentityRanges::LIMITS[i].1;
            (a * scale..=b * scale).contains(&v)
        };
        let ok = self.head_axes.iter().all(|a| (lo..=hi).contains(a))
            && within(self.nose_length, 0, s)
            && within(-self.nose_height, 1, self.head_axes[0])
            && within(self.nose_width, 2, s)
            && within(self.brow_depth, 3, s)
            && within(self.jaw_width, 4, 1.0)
            && within(self.eye_spacing, 5, s)
            && within(self.eye_depth, 6, s)
            && within(self.mouth_width, 7, s)
            && within(self.mouth_depth, 8, s);
        if ok { Ok(()) } else { Err(Error::InvalidPhantomParams(format!("identity out of bounds: {self:?}"))) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    pub subject_id: u64,
    pub identity: Identity,
    pub scan: Volume,
    pub brain: Volume,
}

/// Phantom with an identity drawn from `seed`.
pub fn generate_phantom(seed: Seed, params: &PhantomParams) -> Result<Phantom> {
    params.validate()?;
    let identity = Identity::sample(seed.derive_tag("identity"), params);
    phantom_from_identity(&identity, seed, params)
}

/// Phantom for a given identity. `seed` drives the brain texture and the
/// background noise; the face texture comes from the identity.
pub fn phantom_from_identity(identity: &Identity, seed: Seed, params: &PhantomParams) -> Result<Phantom> {
    params.validate()?;
    identity.validate(params)?;
    let side = params.side;
    let dims = [side; 3];
    let c = (side as f64 - 1.0) / 2.0;
    let a = identity.head_axes;

    let face_tex = low_frequency_noise(dims, Seed(identity.texture_seed), 4);
    let brain_tex = low_frequency_noise(dims, seed.derive_tag("brain"), 4);
    let normal = Normal::new(params.background_mean, params.background_sd)
        .map_err(|e| Error::InvalidPhantomParams(e.to_string()))?;

    // front surface of the head at a given height
    let front = |h: f64| c + a[1] * (1.0 - (h / a[0]).powi(2)).max(0.0).sqrt();
    let nose_center = [c + identity.nose_height, front(identity.nose_height), c];
    let nose_axes = [0.09 * side as f64, identity.nose_length.max(0.5), identity.nose_width.max(0.5)];
    let brow_h = 0.35 * a[0];
    let brow_center = [c + brow_h, front(brow_h) - 1.0, c];
    let brow_axes = [0.05 * side as f64, identity.brow_depth + 1.0, 0.5 * a[2]];
    // concave features, carved from the plain head before the protrusions
    let eye_h = 0.1 * a[0];
    let eye_axes = [0.04 * side as f64, identity.eye_depth.max(0.5), 0.05 * side as f64];
    let eyes = [-1.0, 1.0].map(|sgn| [c + eye_h, front(eye_h), c + sgn * identity.eye_spacing / 2.0]);
    let mouth_h = -0.6 * a[0];
    let mouth_center = [c + mouth_h, front(mouth_h), c];
    let mouth_axes = [0.015 * side as f64, identity.mouth_depth.max(0.5), (identity.mouth_width / 2.0).max(0.5)];
    let in_ellipsoid = |d: [f64; 3], ax: [f64; 3]| (0..3).map(|i| (d[i] / ax[i]).powi(2)).sum::<f64>() <= 1.0;

    let mut noise_rng = seed.derive_tag("background").stream();
    let mut scan = vec![0f32; side * side * side];
    let mut brain = vec![0f32; side * side * side];
    let mut i = 0;
    for k0 in 0..side {
        for k1 in 0..side {
            for k2 in 0..side {
                let d = [k0 as f64 - c, k1 as f64 - c, k2 as f64 - c];
                // normalized radius of the plain ellipsoid
                let rho = (0..3).map(|j| (d[j] / a[j]).powi(2)).sum::<f64>().sqrt();
                let chin = (-d[0] / a[0]).clamp(0.0, 1.0);
                let jaw_axes = [a[0], a[1], a[2] * (1.0 + (identity.jaw_width - 1.0) * chin)];
                let k = [k0 as f64, k1 as f64, k2 as f64];
                let near = |ctr: [f64; 3], ax: [f64; 3]| in_ellipsoid(std::array::from_fn(|j| k[j] - ctr[j]), ax);
                let carved = eyes.iter().any(|&e| near(e, eye_axes)) || near(mouth_center, mouth_axes);
                let head = (in_ellipsoid(d, jaw_axes) && !carved)
                    || near(nose_center, nose_axes)
                    || near(brow_center, brow_axes);
                let bg = normal.sample(&mut noise_rng).max(0.0) as f32;
                scan[i] = if !head {
                    bg
                } else if rho <= VENTRICLE_RADIUS {
                    brain[i] = 1.0;
                    VENTRICLE
                } else if rho <= BRAIN_RADIUS {
                    brain[i] = 1.0;
                    (BRAIN + 0.1 * brain_tex.data()[i]).clamp(BRAIN_RANGE.0, BRAIN_RANGE.1)
                } else if rho <= SKULL_RADIUS {
                    SKULL
                } else {
                    (SOFT_TISSUE + 0.2 * face_tex.data()[i]).clamp(SOFT_TISSUE_RANGE.0, SOFT_TISSUE_RANGE.1)
                };
                i += 1;
            }
        }
    }
    Ok(Phantom {
        subject_id: seed.0,
        identity: identity.clone(),
        scan: Volume::new(dims, scan)?,
        brain: Volume::new(dims, brain)?,
    })
}
