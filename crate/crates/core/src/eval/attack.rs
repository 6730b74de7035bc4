//! Re-identification attacks against de-identified renderings.
//!
//! A deterministic matcher stands in for human raters and learned attackers:
//! renderings are block-averaged, normalized to zero mean and unit norm, and
//! compared by Euclidean distance.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::phantom::Phantom;
use super::render::{render_face, Rendering, View};
use super::stats::{ks_p_value, ks_statistic_uniform};
use crate::deid::{deidentify, DeidMethod, DeidParams};
use crate::error::{Error, Result};
use crate::rng::Seed;

/// Options shown per identification trial.
pub const GALLERY_SIZE: usize = 5;
/// Surface threshold of the attacker's renderer.
pub const RENDER_DELTA: f64 = 0.3;
/// Block size of the matcher's downsampling.
pub const MATCH_BLOCK: usize = 4;
/// Smallest gallery for rank retrieval.
pub const MIN_RANK_GALLERY: usize = 10;

fn embed(r: &Rendering) -> Vec<f64> {
    let w = r.width;
    let n = w.div_ceil(MATCH_BLOCK);
    let mut sums = vec![0f64; n * n];
    let mut counts = vec![0f64; n * n];
    for row in 0..w {
        for col in 0..w {
            let j = (row / MATCH_BLOCK) * n + col / MATCH_BLOCK;
            sums[j] += r.get(row, col) as f64;
            counts[j] += 1.0;
        }
    }
    let mut v: Vec<f64> = sums.iter().zip(&counts).map(|(s, c)| s / c).collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    // a flat image has no shape to normalize; it embeds at the origin
    if norm > 1e-12 {
        v.iter_mut().for_each(|x| *x /= norm);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    v
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_pair(a: &Rendering, b: &Rendering) -> Result<()> {
    if a.width != b.width {
        return Err(Error::DimMismatch([a.width, a.width, 1], [b.width, b.width, 1]));
    }
    if a.view != b.view {
        return Err(Error::InvalidParams(format!("cannot match {:?} against {:?}", a.view, b.view)));
    }
    Ok(())
}

/// Matcher distance between two renderings of the same view and size.
pub fn match_distance(a: &Rendering, b: &Rendering) -> Result<f64> {
    check_pair(a, b)?;
    Ok(euclid(&embed(a), &embed(b)))
}

fn distances(query: &Rendering, candidates: &[Rendering]) -> Result<Vec<f64>> {
    let q = embed(query);
    candidates
        .iter()
        .map(|c| {
            check_pair(query, c)?;
            Ok(euclid(&q, &embed(c)))
        })
        .collect()
}

/// Index of the closest candidate; ties go to the lowest index.
pub fn closest(query: &Rendering, candidates: &[Rendering]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput);
    }
    let d = distances(query, candidates)?;
    let mut best = 0;
    for (i, &v) in d.iter().enumerate() {
        if v < d[best] {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub method: DeidMethod,
    pub query_slot: usize,
    pub chosen: usize,
    pub correct: bool,
}

/// Seed used to de-identify one subject, shared by every trial it appears in.
pub fn subject_seed(seed: Seed, subject_id: u64) -> Seed {
    seed.derive_tag("deid").derive(subject_id)
}

/// Frontal attacker rendering of a volume.
pub fn attack_rendering(x: &crate::Volume) -> Result<Rendering> {
    render_face(x, RENDER_DELTA, View::Frontal)
}

/// Renders the query's original face and all de-identified gallery members,
/// then guesses the closest one.
pub fn identification_trial(
    query: &Phantom,
    gallery: &[Phantom],
    method: DeidMethod,
    params: &DeidParams,
    seed: Seed,
) -> Result<TrialResult> {
    if gallery.len() != GALLERY_SIZE {
        return Err(Error::InvalidGallery(format!("gallery needs {GALLERY_SIZE} members, got {}", gallery.len())));
    }
    let ids: HashSet<u64> = gallery.iter().map(|p| p.subject_id).collect();
    if ids.len() != gallery.len() {
        return Err(Error::InvalidGallery("gallery subjects must be distinct".into()));
    }
    let query_slot = gallery
        .iter()
        .position(|p| p.subject_id == query.subject_id)
        .ok_or_else(|| Error::InvalidGallery("query is not in the gallery".into()))?;
    let candidates: Vec<Rendering> = gallery
        .iter()
        .map(|p| attack_rendering(&deidentify(&p.scan, &p.brain, method, params, subject_seed(seed, p.subject_id))?))
        .collect::<Result<_>>()?;
    let chosen = closest(&attack_rendering(&query.scan)?, &candidates)?;
    Ok(TrialResult { method, query_slot, chosen, correct: chosen == query_slot })
}

/// Relative ranks of the true match, one per query, with their distance to
/// the uniform distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankCurve {
    /// Sorted ascending, each in `[0, 1]`.
    pub alphas: Vec<f64>,
    pub ks: f64,
    pub ks_p: f64,
}

impl RankCurve {
    pub fn from_alphas(mut alphas: Vec<f64>) -> Result<Self> {
        alphas.sort_by(f64::total_cmp);
        let ks = ks_statistic_uniform(&alphas)?;
        Ok(Self { ks_p: ks_p_value(ks, alphas.len()), alphas, ks })
    }

    /// Fraction of queries with `alpha_C <= a` on an evenly spaced grid of
    /// `points` values over `[0, 1]`.
    pub fn curve(&self, points: usize) -> Vec<f64> {
        let n = self.alphas.len() as f64;
        (0..points)
            .map(|i| {
                let a = if points > 1 { i as f64 / (points - 1) as f64 } else { 1.0 };
                self.alphas.partition_point(|&x| x <= a + 1e-12) as f64 / n
            })
            .collect()
    }
}

/// Ranks of `deidentified[i]` among all de-identified renderings by distance
/// to `originals[i]`. Ties are ordered uniformly at random.
pub fn rank_from_renderings(originals: &[Rendering], deidentified: &[Rendering], seed: Seed) -> Result<RankCurve> {
    use rand::Rng;
    let n = deidentified.len();
    if n < MIN_RANK_GALLERY {
        return Err(Error::InvalidGallery(format!("rank retrieval needs at least {MIN_RANK_GALLERY} subjects, got {n}")));
    }
    if originals.len() != n {
        return Err(Error::InvalidGallery("one original per gallery member is required".into()));
    }
    let embedded: Vec<Vec<f64>> = deidentified.iter().map(embed).collect();
    let alphas = originals
        .iter()
        .enumerate()
        .map(|(i, q)| {
            check_pair(q, &deidentified[i])?;
            let qe = embed(q);
            let d: Vec<f64> = embedded.iter().map(|e| euclid(&qe, e)).collect();
            let closer = d.iter().filter(|&&v| v < d[i]).count();
            let tied = d.iter().enumerate().filter(|&(j, &v)| j != i && v == d[i]).count();
            let jitter = seed.derive(i as u64).stream().random_range(0..=tied);
            Ok((closer + jitter) as f64 / (n - 1) as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    RankCurve::from_alphas(alphas)
}

/// Rank retrieval over a set of subjects, each acting once as the query.
pub fn rank_retrieval(subjects: &[Phantom], method: DeidMethod, params: &DeidParams, seed: Seed) -> Result<RankCurve> {
    let pairs: Vec<(Rendering, Rendering)> = subjects
        .par_iter()
        .map(|p| {
            let y = deidentify(&p.scan, &p.brain, method, params, subject_seed(seed, p.subject_id))?;
            Ok((attack_rendering(&p.scan)?, attack_rendering(&y)?))
        })
        .collect::<Result<_>>()?;
    let (orig, deid): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    rank_from_renderings(&orig, &deid, seed.derive_tag("ties"))
}
