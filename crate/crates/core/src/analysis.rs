//! Detectors for undesired dimensions.
//!
//! Each detector turns a frozen model into a per-dimension score and a
//! [`RegenPlan`]:
//!
//! * insignificant: low variance of the raw class values across classes;
//! * misleading: over mispredicted samples whose true class is the runner-up,
//!   dimensions where the sample sits far from the true class and close to
//!   the predicted one;
//! * domain-variant: high variance of a class's (unit-normalized) prototype
//!   across per-domain models, summed over classes.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{HdcError, Result};
use crate::inference::{ranking, scores_unchecked};
use crate::model::{selection_count, ClassModel, Dataset, EncoderState, Hypervector, RegenPlan, Strategy};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Per-dimension evidence; higher means "more worth regenerating".
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ScoreVector(pub Vec<f64>);

impl Deref for ScoreVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl ScoreVector {
    pub fn summary(&self) -> ScoreSummary {
        let (min, max) = self.0.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        ScoreSummary {
            min,
            max,
            mean: self.0.iter().sum::<f64>() / self.0.len().max(1) as f64,
        }
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rate) {
        Ok(())
    } else {
        Err(HdcError::invalid(format!("rate {rate} outside [0, 1]")))
    }
}

/// Highest-scoring `count` indices (ties to the lower index), returned in
/// ascending order. With `positive_only`, indices scoring <= 0 never qualify.
fn select_top(scores: &[f64], count: usize, positive_only: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len())
        .filter(|&i| !positive_only || scores[i] > 0.0)
        .collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    order.truncate(count);
    order.sort_unstable();
    order
}

/// Population variance of each dimension across the class hypervectors.
pub fn variance_over_classes(m: &ClassModel) -> Result<Vec<f64>> {
    let classes = m.num_classes();
    if classes < 2 {
        return Err(HdcError::invalid("variance needs at least two classes"));
    }
    let dim = m.dim();
    let mut mean = vec![0.0; dim];
    for l in 0..classes {
        for (acc, v) in mean.iter_mut().zip(m.class(l)) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= classes as f64);
    let mut var = vec![0.0; dim];
    for l in 0..classes {
        for ((acc, v), mu) in var.iter_mut().zip(m.class(l)).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    var.iter_mut().for_each(|v| *v /= classes as f64);
    Ok(var)
}

/// The `floor(R·D)` lowest-variance dimensions.
pub fn select_insignificant(m: &ClassModel, rate: f64) -> Result<RegenPlan> {
    check_rate(rate)?;
    let scores: Vec<f64> = variance_over_classes(m)?.into_iter().map(|v| -v).collect();
    let indices = select_top(&scores, selection_count(rate, m.dim()), false);
    RegenPlan::new(indices, scores, Strategy::Insignificant, rate)
}

/// Misleading-dimension scores over a labeled dataset.
pub fn misleading_scores(m: &ClassModel, e: &EncoderState, train: &Dataset) -> Result<ScoreVector> {
    if e.dim() != m.dim() {
        return Err(HdcError::invalid("encoder and model dimensionality differ"));
    }
    let features: Vec<_> = train.samples.iter().map(|s| s.features.clone()).collect();
    let encoded = e.encode_batch(&features)?;
    let labels: Vec<usize> = train.samples.iter().map(|s| s.label).collect();
    if labels.iter().any(|&y| y >= m.num_classes()) {
        return Err(HdcError::invalid("sample label outside model label set"));
    }
    Ok(misleading_scores_encoded(m, &encoded, &labels))
}

pub(crate) fn misleading_scores_encoded(m: &ClassModel, encoded: &[Hypervector], labels: &[usize]) -> ScoreVector {
    let top2 = |h: &Hypervector| {
        let order = ranking(&scores_unchecked(m, h));
        (order[0], order.get(1).copied())
    };
    #[cfg(feature = "parallel")]
    let ranked: Vec<_> = encoded.par_iter().map(top2).collect();
    #[cfg(not(feature = "parallel"))]
    let ranked: Vec<_> = encoded.iter().map(top2).collect();

    let units: Vec<Vec<f64>> = (0..m.num_classes()).map(|l| m.unit_class(l)).collect();
    let mut scores = vec![0.0; m.dim()];
    for ((h, &y), (first, second)) in encoded.iter().zip(labels).zip(ranked) {
        if first == y || second != Some(y) {
            continue;
        }
        let (right, wrong) = (&units[y], &units[first]);
        for (i, s) in scores.iter_mut().enumerate() {
            *s += (h[i] - right[i]).abs() - (h[i] - wrong[i]).abs();
        }
    }
    ScoreVector(scores)
}

/// Up to `floor(R·D)` highest positive misleading scores.
pub fn select_misleading(scores: &ScoreVector, rate: f64) -> Result<RegenPlan> {
    check_rate(rate)?;
    let indices = select_top(scores, selection_count(rate, scores.len()), true);
    RegenPlan::new(indices, scores.0.clone(), Strategy::Misleading, rate)
}

/// Summed per-class variance of unit-normalized class prototypes across
/// per-domain models.
pub fn domain_variance(models: &[ClassModel]) -> Result<ScoreVector> {
    if models.len() < 2 {
        return Err(HdcError::invalid("domain variance needs at least two domain models"));
    }
    let first = &models[0];
    if models
        .iter()
        .any(|m| m.dim() != first.dim() || m.labels() != first.labels())
    {
        return Err(HdcError::invalid("domain models must share labels and D"));
    }
    let domains = models.len() as f64;
    let dim = first.dim();
    let mut total = vec![0.0; dim];
    for l in 0..first.num_classes() {
        let rows: Vec<Vec<f64>> = models.iter().map(|m| m.unit_class(l)).collect();
        let mut mean = vec![0.0; dim];
        for row in &rows {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= domains);
        let mut var = vec![0.0; dim];
        for row in &rows {
            for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        for (t, v) in total.iter_mut().zip(var) {
            *t += v / domains;
        }
    }
    Ok(ScoreVector(total))
}

/// Up to `floor(R·D)` highest positive domain-variance scores.
pub fn select_domain_variant(scores: &ScoreVector, rate: f64) -> Result<RegenPlan> {
    check_rate(rate)?;
    let indices = select_top(scores, selection_count(rate, scores.len()), true);
    RegenPlan::new(indices, scores.0.clone(), Strategy::DomainVariant, rate)
}

/// One bundled model per domain present in `train`, in domain-id order.
pub fn domain_models(e: &EncoderState, train: &Dataset) -> Result<Vec<ClassModel>> {
    if !train.has_domains() {
        return Err(HdcError::invalid("dataset has no domain ids"));
    }
    let features: Vec<_> = train.samples.iter().map(|s| s.features.clone()).collect();
    let encoded = e.encode_batch(&features)?;
    domain_models_encoded(train, &encoded, e.dim())
}

pub(crate) fn domain_models_encoded(train: &Dataset, encoded: &[Hypervector], dim: usize) -> Result<Vec<ClassModel>> {
    let mut models = Vec::new();
    for domain in 0..train.num_domains() {
        let mut model = ClassModel::zeros(train.label_names.clone(), dim)?;
        let mut seen = false;
        for (s, h) in train.samples.iter().zip(encoded) {
            if s.domain == Some(domain) {
                model.add_scaled(s.label, 1.0, h);
                seen = true;
            }
        }
        if seen {
            models.push(model);
        }
    }
    Ok(models)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(rows: &[&[f64]]) -> ClassModel {
        let labels = (0..rows.len()).map(|i| format!("c{i}")).collect();
        ClassModel::from_parts(labels, rows[0].len(), rows.concat()).unwrap()
    }

    #[test]
    fn variance_examples() {
        let same = model(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]);
        assert_eq!(variance_over_classes(&same).unwrap(), vec![0.0; 3]);
        let m = model(&[&[1.0, 0.0], &[1.0, 2.0]]);
        assert_eq!(variance_over_classes(&m).unwrap(), vec![0.0, 1.0]);
        assert!(variance_over_classes(&model(&[&[1.0]])).is_err());
    }

    #[test]
    fn insignificant_selection_examples() {
        // Two classes +-sqrt(v) around zero give per-dim variance v.
        let var = [0.0f64, 1.0, 0.5, 2.0];
        let up: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
        let down: Vec<f64> = up.iter().map(|v| -v).collect();
        let m = model(&[&up, &down]);
        let plan = select_insignificant(&m, 0.5).unwrap();
        assert_eq!(plan.indices(), &[0, 2]);
        assert!(select_insignificant(&m, 0.0).unwrap().is_empty());
        assert!(select_insignificant(&m, 1.1).is_err());

        let flat = model(&[&[1.0; 4], &[3.0; 4]]);
        assert_eq!(select_insignificant(&flat, 0.25).unwrap().indices(), &[0]);
    }

    #[test]
    fn misleading_single_sample() {
        // Unit classes: c0 = (0,1) is the true class, c1 = (1,0) wins.
        let m = model(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let h: Hypervector = vec![1.0, 0.0].into();
        let s = misleading_scores_encoded(&m, &[h], &[0]);
        assert_eq!(s.0, vec![1.0, 1.0]);
        let plan = select_misleading(&s, 0.5).unwrap();
        assert_eq!(plan.indices(), &[0]);
    }

    #[test]
    fn misleading_ignores_correct_and_deep_misses() {
        let m = model(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.9, 0.1, 0.0]]);
        let h: Hypervector = vec![1.0, 0.0, 0.0].into();
        // Correct prediction.
        assert_eq!(misleading_scores_encoded(&m, std::slice::from_ref(&h), &[1]).0, vec![0.0; 3]);
        // True label ranked third.
        assert_eq!(misleading_scores_encoded(&m, &[h], &[0]).0, vec![0.0; 3]);
    }

    #[test]
    fn misleading_selection_filters_non_positive() {
        let s = ScoreVector(vec![-2.0, 3.0, 1.0]);
        assert_eq!(select_misleading(&s, 1.0).unwrap().indices(), &[1, 2]);
        assert!(select_misleading(&ScoreVector(vec![0.0; 5]), 1.0).unwrap().is_empty());
    }

    #[test]
    fn domain_variance_examples() {
        let a = model(&[&[0.0, 1.0]]);
        let b = model(&[&[1.0, 0.0]]);
        assert_eq!(domain_variance(&[a.clone(), b]).unwrap().0, vec![0.25, 0.25]);
        assert_eq!(domain_variance(&[a.clone(), a.clone()]).unwrap().0, vec![0.0, 0.0]);
        assert!(domain_variance(&[a]).is_err());
    }

    #[test]
    fn domain_variance_sums_classes() {
        // Class 0 contributes (0.25, 0.25, 0), class 1 contributes (0, 0.25, 0.25).
        let a = model(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let b = model(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        assert_eq!(domain_variance(&[a, b]).unwrap().0, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn domain_variant_selection() {
        let v = ScoreVector(vec![1.0, 3.0]);
        assert_eq!(select_domain_variant(&v, 0.5).unwrap().indices(), &[1]);
        assert!(select_domain_variant(&ScoreVector(vec![0.0; 3]), 0.7)
            .unwrap()
            .is_empty());
        let all = ScoreVector(vec![0.5, 0.1, 0.9]);
        assert_eq!(select_domain_variant(&all, 1.0).unwrap().indices(), &[0, 1, 2]);
    }
}
