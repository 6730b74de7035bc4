//! Experiment runners producing JSON-serializable reports.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::attack::{attack_rendering, closest, rank_from_renderings, subject_seed, GALLERY_SIZE, MIN_RANK_GALLERY};
use super::metrics::{segmentation_impact, SegClass, SegMode};
use super::phantom::{generate_phantom, Phantom, PhantomParams};
use super::render::Rendering;
use super::stats::{binomial_two_sided, bootstrap_ci};
use crate::deid::{deidentify, DeidMethod, DeidParams};
use crate::error::{Error, Result};
use crate::rng::Seed;

/// Points on the rank-curve grid.
pub const CURVE_POINTS: usize = 101;
pub const CHANCE: f64 = 1.0 / GALLERY_SIZE as f64;

/// Phantom for subject `i` of an experiment.
pub fn subject(seed: Seed, i: usize, params: &PhantomParams) -> Result<Phantom> {
    generate_phantom(seed.derive_tag("subject").derive(i as u64), params)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdConfig {
    pub subjects: usize,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<DeidMethod>,
    pub phantom: PhantomParams,
    pub deid: DeidParams,
    pub bootstrap: usize,
}

impl Default for IdConfig {
    fn default() -> Self {
        Self {
            subjects: 100,
            trials: 500,
            seed: 0,
            methods: DeidMethod::ALL.to_vec(),
            phantom: PhantomParams::default(),
            deid: DeidParams::default(),
            bootstrap: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodIdReport {
    pub method: DeidMethod,
    pub trials: usize,
    pub correct: usize,
    pub rate: f64,
    pub bootstrap_mean: f64,
    pub bootstrap_sd: f64,
    /// Two-sided binomial test against chance.
    pub chance_p: f64,
    pub rank_ks: f64,
    pub rank_ks_p: f64,
    /// Fraction of queries whose true match ranks within the top `alpha`,
    /// on an even grid of `alpha` in `[0, 1]`.
    pub rank_curve: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdReport {
    pub config: IdConfig,
    pub chance: f64,
    pub methods: Vec<MethodIdReport>,
}

impl IdReport {
    pub fn method(&self, m: DeidMethod) -> Option<&MethodIdReport> {
        self.methods.iter().find(|r| r.method == m)
    }
}

/// Gallery members of trial `t` and the slot holding the query.
///
/// Query slots cycle through `0..GALLERY_SIZE` so a matcher that always
/// answers the same slot scores exactly chance.
pub fn trial_gallery(seed: Seed, t: usize, subjects: usize) -> (Vec<usize>, usize) {
    let members = index::sample(&mut seed.derive_tag("trial").derive(t as u64).stream(), subjects, GALLERY_SIZE).into_vec();
    (members, t % GALLERY_SIZE)
}

/// Five-option identification and rank retrieval for every configured method.
///
/// Each subject is de-identified once per method with a per-subject seed;
/// trials then draw galleries from those fixed outputs.
pub fn run_identification(cfg: &IdConfig) -> Result<IdReport> {
    if cfg.subjects < GALLERY_SIZE.max(MIN_RANK_GALLERY) {
        return Err(Error::InvalidGallery(format!(
            "need at least {} subjects, got {}",
            GALLERY_SIZE.max(MIN_RANK_GALLERY),
            cfg.subjects
        )));
    }
    if cfg.trials == 0 || cfg.methods.is_empty() {
        return Err(Error::InvalidCount("trials and methods must be nonempty".into()));
    }
    let seed = Seed(cfg.seed);
    // per subject: original rendering, then one rendering per method
    let renders: Vec<(Rendering, Vec<Rendering>)> = (0..cfg.subjects)
        .into_par_iter()
        .map(|i| {
            let p = subject(seed, i, &cfg.phantom)?;
            let deid = cfg
                .methods
                .iter()
                .map(|&m| attack_rendering(&deidentify(&p.scan, &p.brain, m, &cfg.deid, subject_seed(seed, i as u64))?))
                .collect::<Result<Vec<_>>>()?;
            Ok((attack_rendering(&p.scan)?, deid))
        })
        .collect::<Result<_>>()?;

    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let outcomes = (0..cfg.trials)
                .map(|t| {
                    let (members, slot) = trial_gallery(seed, t, cfg.subjects);
                    let gallery: Vec<Rendering> = members.iter().map(|&s| renders[s].1[mi].clone()).collect();
                    Ok(closest(&renders[members[slot]].0, &gallery)? == slot)
                })
                .collect::<Result<Vec<bool>>>()?;
            let correct = outcomes.iter().filter(|&&c| c).count();
            let values: Vec<f64> = outcomes.iter().map(|&c| c as u8 as f64).collect();
            let (bootstrap_mean, bootstrap_sd) = bootstrap_ci(&values, cfg.bootstrap, seed.derive_tag("bootstrap"))?;
            let originals: Vec<Rendering> = renders.iter().map(|r| r.0.clone()).collect();
            let deid: Vec<Rendering> = renders.iter().map(|r| r.1[mi].clone()).collect();
            let ranks = rank_from_renderings(&originals, &deid, seed.derive_tag("ties").derive(mi as u64))?;
            Ok(MethodIdReport {
                method,
                trials: cfg.trials,
                correct,
                rate: correct as f64 / cfg.trials as f64,
                bootstrap_mean,
                bootstrap_sd,
                chance_p: binomial_two_sided(correct as u64, cfg.trials as u64, CHANCE)?,
                rank_ks: ranks.ks,
                rank_ks_p: ranks.ks_p,
                rank_curve: ranks.curve(CURVE_POINTS),
            })
        })
        .collect::<Result<_>>()?;
    Ok(IdReport { config: cfg.clone(), chance: CHANCE, methods })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegConfig {
    pub subjects: usize,
    pub seed: u64,
    pub methods: Vec<DeidMethod>,
    pub phantom: PhantomParams,
    pub deid: DeidParams,
}

impl Default for SegConfig {
    fn default() -> Self {
        Self {
            subjects: 10,
            seed: 0,
            methods: DeidMethod::ALL.to_vec(),
            phantom: PhantomParams::default(),
            deid: DeidParams::default(),
        }
    }
}

/// Mean and spread of one (method, mode, class) cell over subjects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegRow {
    pub method: DeidMethod,
    pub mode: SegMode,
    pub class: SegClass,
    pub dice_mean: f64,
    pub dice_sd: f64,
    pub dice_min: f64,
    pub iou_mean: f64,
    pub iou_sd: f64,
    pub iou_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegReport {
    pub config: SegConfig,
    pub rows: Vec<SegRow>,
}

impl SegReport {
    pub fn row(&self, method: DeidMethod, mode: SegMode, class: SegClass) -> Option<&SegRow> {
        self.rows.iter().find(|r| r.method == method && r.mode == mode && r.class == class)
    }
}

fn mean_sd_min(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    (mean, sd, v.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Dice/IoU between segmentations of original and de-identified scans.
pub fn run_segmentation(cfg: &SegConfig) -> Result<SegReport> {
    if cfg.subjects == 0 || cfg.methods.is_empty() {
        return Err(Error::InvalidCount("subjects and methods must be nonempty".into()));
    }
    let seed = Seed(cfg.seed);
    let modes = [SegMode::BrainRestricted, SegMode::WholeHead];
    // scores[subject][method][mode] -> per-class scores
    let scores = (0..cfg.subjects)
        .into_par_iter()
        .map(|i| {
            let p = subject(seed, i, &cfg.phantom)?;
            cfg.methods
                .iter()
                .map(|&m| {
                    let y = deidentify(&p.scan, &p.brain, m, &cfg.deid, subject_seed(seed, i as u64))?;
                    modes.iter().map(|&mode| segmentation_impact(&p.scan, &y, &p.brain, mode)).collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (mi, &method) in cfg.methods.iter().enumerate() {
        for (di, &mode) in modes.iter().enumerate() {
            for (ci, &class) in SegClass::ALL.iter().enumerate() {
                let d: Vec<f64> = scores.iter().map(|s| s[mi][di][ci].dice).collect();
                let j: Vec<f64> = scores.iter().map(|s| s[mi][di][ci].iou).collect();
                let (dice_mean, dice_sd, dice_min) = mean_sd_min(&d);
                let (iou_mean, iou_sd, iou_min) = mean_sd_min(&j);
                rows.push(SegRow { method, mode, class, dice_mean, dice_sd, dice_min, iou_mean, iou_sd, iou_min });
            }
        }
    }
    Ok(SegReport { config: cfg.clone(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn galleries_are_distinct_and_balanced() {
        let mut slots = [0; GALLERY_SIZE];
        for t in 0..50 {
            let (m, slot) = trial_gallery(Seed(3), t, 12);
            let mut s = m.clone();
            s.sort();
            s.dedup();
            assert_eq!(s.len(), GALLERY_SIZE);
            slots[slot] += 1;
        }
        assert_eq!(slots, [10; GALLERY_SIZE]);
    }

    #[test]
    fn small_identification_run() {
        let cfg = IdConfig {
            subjects: 12,
            trials: 40,
            methods: vec![DeidMethod::Original, DeidMethod::Black],
            phantom: PhantomParams::for_side(32),
            ..Default::default()
        };
        let r = run_identification(&cfg).unwrap();
        let orig = r.method(DeidMethod::Original).unwrap();
        assert_eq!(orig.rate, 1.0);
        assert_eq!(orig.rank_curve[0], 1.0);
        assert_eq!(r.method(DeidMethod::Black).unwrap().correct, 8);
        assert_eq!(orig.rank_curve.len(), CURVE_POINTS);
        assert!(run_identification(&IdConfig { subjects: 4, ..cfg }).is_err());
    }

    #[test]
    fn small_segmentation_run() {
        let cfg = SegConfig {
            subjects: 2,
            methods: vec![DeidMethod::Original, DeidMethod::SkullStrip],
            phantom: PhantomParams::for_side(32),
            ..Default::default()
        };
        let r = run_segmentation(&cfg).unwrap();
        assert_eq!(r.rows.len(), 2 * 2 * 2);
        for row in r.rows.iter().filter(|r| r.method == DeidMethod::Original) {
            assert_eq!((row.dice_mean, row.iou_mean), (1.0, 1.0));
        }
        let whole = r.row(DeidMethod::SkullStrip, SegMode::WholeHead, SegClass::Tissue).unwrap();
        assert!(whole.dice_mean < 0.8, "{whole:?}");
    }
}
