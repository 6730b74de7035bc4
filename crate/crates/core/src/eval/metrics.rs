//! Overlap metrics and intensity-band segmentation.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::volume::Volume;

fn overlap(a: &Volume, b: &Volume) -> Result<(usize, usize, usize)> {
    a.same_dims(b)?;
    let (mut na, mut nb, mut both) = (0, 0, 0);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let (x, y) = (x == 1.0, y == 1.0);
        na += x as usize;
        nb += y as usize;
        both += (x && y) as usize;
    }
    Ok((na, nb, both))
}

/// `2|a∩b| / (|a|+|b|)`, 1 when both are empty.
pub fn dice(a: &Volume, b: &Volume) -> Result<f64> {
    let (na, nb, both) = overlap(a, b)?;
    Ok(if na + nb == 0 { 1.0 } else { 2.0 * both as f64 / (na + nb) as f64 })
}

/// `|a∩b| / |a∪b|`, 1 when both are empty.
pub fn iou(a: &Volume, b: &Volume) -> Result<f64> {
    let (na, nb, both) = overlap(a, b)?;
    let union = na + nb - both;
    Ok(if union == 0 { 1.0 } else { both as f64 / union as f64 })
}

/// Intensity classes of the threshold segmenter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegClass {
    /// Brain parenchyma and other soft tissue, `[0.5, 1.0]`.
    Tissue,
    /// Fluid-filled interior, `[0.35, 0.5)`.
    Ventricle,
}

impl SegClass {
    pub const ALL: [SegClass; 2] = [SegClass::Tissue, SegClass::Ventricle];

    pub fn contains(self, v: f32) -> bool {
        match self {
            SegClass::Tissue => (0.5..=1.0).contains(&v),
            SegClass::Ventricle => (0.35..0.5).contains(&v),
        }
    }
}

/// Where the segmenter looks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegMode {
    /// Only voxels inside the brain mask.
    BrainRestricted,
    /// Every voxel.
    WholeHead,
}

pub fn segment(x: &Volume, b: &Volume, class: SegClass, mode: SegMode) -> Result<Volume> {
    x.same_dims(b)?;
    let data = x
        .data()
        .iter()
        .zip(b.data())
        .map(|(&v, &m)| {
            let eligible = mode == SegMode::WholeHead || m == 1.0;
            if eligible && class.contains(v) { 1.0 } else { 0.0 }
        })
        .collect();
    Volume::new(x.dims(), data)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: SegClass,
    pub dice: f64,
    pub iou: f64,
}

/// Per-class agreement between the segmentations of `x` and of `y`.
pub fn segmentation_impact(x: &Volume, y: &Volume, b: &Volume, mode: SegMode) -> Result<Vec<ClassScore>> {
    x.same_dims(y)?;
    SegClass::ALL
        .iter()
        .map(|&class| {
            let sx = segment(x, b, class, mode)?;
            let sy = segment(y, b, class, mode)?;
            Ok(ClassScore { class, dice: dice(&sx, &sy)?, iou: iou(&sx, &sy)? })
        })
        .collect()
}
