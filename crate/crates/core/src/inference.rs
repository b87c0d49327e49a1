//! Cosine-similarity scoring, top-k prediction and accuracy, plus a seeded
//! model perturbation used to probe robustness to noisy storage.

use serde::Serialize;

use crate::error::{HdcError, Result};
use crate::model::{dot, norm, ClassModel, Dataset, EncoderState, Hypervector};
use crate::rng::{streams, DrawStream};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Per-class similarities, in model label order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimilarityScores(pub Vec<f64>);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopKResult {
    pub classes: Vec<usize>,
    pub scores: Vec<f64>,
    pub k: usize,
}

impl TopKResult {
    pub fn contains(&self, class: usize) -> bool {
        self.classes.contains(&class)
    }
}

fn cosine_with_norms(a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// `a·b / (|a| |b|)`, or 0 when either vector is zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(HdcError::invalid(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(cosine_with_norms(a, norm(a), b, norm(b)))
}

pub(crate) fn scores_unchecked(m: &ClassModel, h: &[f64]) -> Vec<f64> {
    let nh = norm(h);
    (0..m.num_classes())
        .map(|l| cosine_with_norms(h, nh, m.class(l), m.class_norm(l)))
        .collect()
}

fn check_dim(m: &ClassModel, h: &[f64]) -> Result<()> {
    if h.len() != m.dim() {
        return Err(HdcError::invalid(format!(
            "hypervector has length {}, model has D = {}",
            h.len(),
            m.dim()
        )));
    }
    Ok(())
}

pub fn score_all(m: &ClassModel, h: &Hypervector) -> Result<SimilarityScores> {
    check_dim(m, h)?;
    Ok(SimilarityScores(scores_unchecked(m, h)))
}

/// Class indices ordered by descending score, ties by ascending index.
pub(crate) fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Stable sort keeps lower indices first among equal scores.
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    order
}

/// Index of the highest score, lowest index on ties.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Rank (0-based) of `class` in the ordering produced by [`ranking`].
pub(crate) fn rank_of(scores: &[f64], class: usize) -> usize {
    let target = scores[class];
    scores
        .iter()
        .enumerate()
        .filter(|&(i, &s)| s > target || (s == target && i < class))
        .count()
}

pub fn predict_topk(m: &ClassModel, h: &Hypervector, k: usize) -> Result<TopKResult> {
    if k == 0 || k > m.num_classes() {
        return Err(HdcError::invalid(format!("k = {k} outside [1, {}]", m.num_classes())));
    }
    let SimilarityScores(scores) = score_all(m, h)?;
    let classes: Vec<usize> = ranking(&scores).into_iter().take(k).collect();
    Ok(TopKResult {
        scores: classes.iter().map(|&c| scores[c]).collect(),
        classes,
        k,
    })
}

/// Number of encoded samples whose label ranks within the top `k`.
pub(crate) fn count_topk_hits(m: &ClassModel, encoded: &[Hypervector], labels: &[usize], k: usize) -> usize {
    let hit = |(h, &y): (&Hypervector, &usize)| rank_of(&scores_unchecked(m, h), y) < k;
    #[cfg(feature = "parallel")]
    let hits = encoded.par_iter().zip(labels.par_iter()).filter(|&p| hit(p)).count();
    #[cfg(not(feature = "parallel"))]
    let hits = encoded.iter().zip(labels).filter(|&p| hit(p)).count();
    hits
}

/// Fraction of `test` whose true label is among the `k` most similar classes.
pub fn topk_accuracy(m: &ClassModel, e: &EncoderState, test: &Dataset, k: usize) -> Result<f64> {
    if test.is_empty() {
        return Err(HdcError::invalid("empty dataset"));
    }
    if k == 0 || k > m.num_classes() {
        return Err(HdcError::invalid(format!("k = {k} outside [1, {}]", m.num_classes())));
    }
    if e.dim() != m.dim() {
        return Err(HdcError::invalid("encoder and model dimensionality differ"));
    }
    let features: Vec<_> = test.samples.iter().map(|s| s.features.clone()).collect();
    let encoded = e.encode_batch(&features)?;
    let labels: Vec<usize> = test.samples.iter().map(|s| s.label).collect();
    if labels.iter().any(|&y| y >= m.num_classes()) {
        return Err(HdcError::invalid("test label outside model label set"));
    }
    Ok(count_topk_hits(m, &encoded, &labels, k) as f64 / test.len() as f64)
}

/// Returns a noisy copy of `m`.
///
/// Exactly `floor(q * L * D)` entries, chosen with the seeded noise stream,
/// receive additive Gaussian noise with standard deviation
/// `magnitude * rms(model entries)`.
pub fn perturb_model(m: &ClassModel, q: f64, magnitude: f64, seed: u64) -> Result<ClassModel> {
    if !(0.0..=1.0).contains(&q) {
        return Err(HdcError::invalid(format!("fraction {q} outside [0, 1]")));
    }
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(HdcError::invalid(format!("magnitude {magnitude} must be >= 0")));
    }
    let flat = m.as_flat();
    let total = flat.len();
    let count = crate::model::selection_count(q, total);
    let rms = (flat.iter().map(|v| v * v).sum::<f64>() / total as f64).sqrt();
    let sd = magnitude * rms;
    let mut out = m.clone();
    if count == 0 || sd == 0.0 {
        return Ok(out);
    }
    let mut rng = DrawStream::new(seed, streams::NOISE);
    let picked = rng.sample_indices(total, count);
    let mut noise = vec![0.0; total];
    for idx in picked {
        noise[idx] = sd * rng.gaussian();
    }
    let dim = m.dim();
    out.map_entries(|l, i, v| v + noise[l * dim + i]);
    Ok(out)
}
