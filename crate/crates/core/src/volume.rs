//! Dense cubic-or-not scalar volumes.

use crate::error::{Error, Result};

/// Dense 3D scalar grid, indexed `[k0][k1][k2]` with `k2` varying fastest.
///
/// Scans, binary masks (0.0 / 1.0) and probability maps all share this
/// carrier.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    data: Vec<f32>,
}

impl Volume {
    pub fn new(dims: [usize; 3], data: Vec<f32>) -> Result<Self> {
        let len = voxel_count(dims)?;
        if data.len() != len {
            return Err(Error::InvalidParams(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn filled(dims: [usize; 3], value: f32) -> Self {
        Self { dims, data: vec![value; dims[0] * dims[1] * dims[2]] }
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        Self::filled(dims, 0.0)
    }

    pub fn cube(side: usize, value: f32) -> Self {
        Self::filled([side; 3], value)
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut([usize; 3]) -> f32) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k0 in 0..dims[0] {
            for k1 in 0..dims[1] {
                for k2 in 0..dims[2] {
                    data.push(f([k0, k1, k2]));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Side length if the volume is cubic.
    pub fn side(&self) -> Result<usize> {
        let [a, b, c] = self.dims;
        if a == b && b == c {
            Ok(a)
        } else {
            Err(Error::NonCubicVolume(self.dims))
        }
    }

    #[inline]
    pub fn index(&self, k: [usize; 3]) -> usize {
        (k[0] * self.dims[1] + k[1]) * self.dims[2] + k[2]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let k2 = idx % self.dims[2];
        let r = idx / self.dims[2];
        [r / self.dims[1], r % self.dims[1], k2]
    }

    #[inline]
    pub fn get(&self, k: [usize; 3]) -> f32 {
        self.data[self.index(k)]
    }

    #[inline]
    pub fn set(&mut self, k: [usize; 3], v: f32) {
        let i = self.index(k);
        self.data[i] = v;
    }

    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Volume {
        Volume { dims: self.dims, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn same_dims(&self, other: &Volume) -> Result<()> {
        if self.dims == other.dims {
            Ok(())
        } else {
            Err(Error::DimMismatch(self.dims, other.dims))
        }
    }

    /// Voxel-wise product.
    pub fn hadamard(&self, other: &Volume) -> Result<Volume> {
        self.same_dims(other)?;
        Ok(Volume {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    /// Number of voxels with value 1 (mask cardinality).
    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1.0).count()
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn is_mask(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn is_probability(&self) -> bool {
        self.data.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn min(&self) -> f32 {
        self.data.iter().copied().fold(f32::INFINITY, f32::min)
    }

    /// Mask of voxels where `self` is set but `other` is not.
    pub fn count_outside(&self, other: &Volume) -> Result<usize> {
        self.same_dims(other)?;
        Ok(self.data.iter().zip(&other.data).filter(|(&a, &b)| a == 1.0 && b != 1.0).count())
    }
}

fn voxel_count(dims: [usize; 3]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidParams(format!("dims {dims:?} overflow")))
}

/// `1[x >= delta]` per voxel.
pub fn binarize(x: &Volume, delta: f64) -> Result<Volume> {
    if !delta.is_finite() {
        return Err(Error::InvalidThreshold(delta));
    }
    Ok(x.map(|v| if v as f64 >= delta { 1.0 } else { 0.0 }))
}

const OTSU_BINS: usize = 256;

/// 256-bin Otsu threshold over all voxels.
pub fn otsu_threshold(x: &Volume) -> Result<f64> {
    otsu_from_values(x.data().iter().map(|&v| v as f64))
}

/// Otsu threshold over the nonzero voxels only; the default binarization
/// threshold for scans, whose zero padding would otherwise dominate.
pub fn default_threshold(x: &Volume) -> Result<f64> {
    otsu_from_values(x.data().iter().filter(|&&v| v != 0.0).map(|&v| v as f64))
}

fn otsu_from_values(values: impl Iterator<Item = f64> + Clone) -> Result<f64> {
    let (lo, hi) = values
        .clone()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    // also catches the empty input, where lo = +inf and hi = -inf
    if hi <= lo {
        return Err(Error::DegenerateHistogram);
    }
    let width = (hi - lo) / OTSU_BINS as f64;
    let mut count = [0f64; OTSU_BINS];
    let mut sum = [0f64; OTSU_BINS];
    for v in values {
        let b = (((v - lo) / width) as usize).min(OTSU_BINS - 1);
        count[b] += 1.0;
        sum[b] += v;
    }
    let total: f64 = count.iter().sum();
    let total_sum: f64 = sum.iter().sum();

    let mut best = (f64::NEG_INFINITY, 0usize);
    let (mut w0, mut s0) = (0.0, 0.0);
    for i in 0..OTSU_BINS - 1 {
        w0 += count[i];
        s0 += sum[i];
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = s0 / w0;
        let mu1 = (total_sum - s0) / w1;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if between > best.0 {
            best = (between, i);
        }
    }
    Ok(lo + (best.1 + 1) as f64 * width)
}
