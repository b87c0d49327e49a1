//! Shared domain types: feature vectors, hypervectors, the encoder state,
//! class models, regeneration plans and labeled datasets.

use std::collections::HashSet;
use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{HdcError, Result};

/// A real input sample in the original feature space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for FeatureVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// A vector in the encoded space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hypervector(Vec<f64>);

impl Hypervector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Hypervector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Hypervector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// The random projection behind the encoder.
///
/// `bases` is a row-major `dim x n` matrix whose row `i` is the Gaussian base
/// vector of dimension `i`; `phases[i]` is that dimension's offset in
/// `[0, 2π)`. `draw_counter` is the position of the encoder's random stream,
/// which lets regeneration continue the same stream after a save/load.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderState {
    pub(crate) n: usize,
    pub(crate) dim: usize,
    pub(crate) seed: u64,
    pub(crate) draw_counter: u64,
    pub(crate) bases: Vec<f64>,
    pub(crate) phases: Vec<f64>,
}

impl EncoderState {
    /// Rebuilds an encoder from stored parts, checking shapes and ranges.
    pub fn from_parts(
        n: usize,
        dim: usize,
        seed: u64,
        draw_counter: u64,
        bases: Vec<f64>,
        phases: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(HdcError::invalid("encoder needs n >= 1 and D >= 1"));
        }
        if bases.len() != n * dim {
            return Err(HdcError::invalid(format!(
                "bases has {} entries, expected {}",
                bases.len(),
                n * dim
            )));
        }
        if phases.len() != dim {
            return Err(HdcError::invalid(format!(
                "phases has {} entries, expected {dim}",
                phases.len()
            )));
        }
        if !bases.iter().all(|b| b.is_finite()) {
            return Err(HdcError::NonFinite("encoder base".into()));
        }
        if !phases.iter().all(|p| (0.0..std::f64::consts::TAU).contains(p)) {
            return Err(HdcError::invalid("phase outside [0, 2π)"));
        }
        Ok(Self {
            n,
            dim,
            seed,
            draw_counter,
            bases,
            phases,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draw_counter(&self) -> u64 {
        self.draw_counter
    }

    pub fn base(&self, i: usize) -> &[f64] {
        &self.bases[i * self.n..(i + 1) * self.n]
    }

    pub fn bases(&self) -> &[f64] {
        &self.bases
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }
}

/// Trainable class prototypes.
///
/// Class hypervectors are stored unnormalized in a row-major `L x D` buffer.
/// Every write goes through a method that refreshes the cached norm of the
/// touched class, so `norms` is always current.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassModel {
    dim: usize,
    labels: Vec<String>,
    classes: Vec<f64>,
    norms: Vec<f64>,
}

impl ClassModel {
    pub fn zeros(labels: Vec<String>, dim: usize) -> Result<Self> {
        let classes = vec![0.0; labels.len() * dim];
        Self::from_parts(labels, dim, classes)
    }

    pub fn from_parts(labels: Vec<String>, dim: usize, classes: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(HdcError::invalid("model needs at least one class"));
        }
        if dim == 0 {
            return Err(HdcError::invalid("model dimensionality must be >= 1"));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(HdcError::invalid(format!("duplicate label {dup:?}")));
        }
        if classes.len() != labels.len() * dim {
            return Err(HdcError::invalid(format!(
                "classes has {} entries, expected {}",
                classes.len(),
                labels.len() * dim
            )));
        }
        if !classes.iter().all(|v| v.is_finite()) {
            return Err(HdcError::NonFinite("class hypervector".into()));
        }
        let norms = classes.chunks(dim).map(norm).collect();
        Ok(Self {
            dim,
            labels,
            classes,
            norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn class(&self, l: usize) -> &[f64] {
        &self.classes[l * self.dim..(l + 1) * self.dim]
    }

    pub fn class_norm(&self, l: usize) -> f64 {
        self.norms[l]
    }

    /// Row-major view of all class hypervectors.
    pub fn as_flat(&self) -> &[f64] {
        &self.classes
    }

    /// `C_l += coef * h`.
    pub fn add_scaled(&mut self, l: usize, coef: f64, h: &[f64]) {
        let row = &mut self.classes[l * self.dim..(l + 1) * self.dim];
        for (c, x) in row.iter_mut().zip(h) {
            *c += coef * x;
        }
        self.norms[l] = norm(row);
    }

    /// Overwrites class `l`.
    pub fn set_class(&mut self, l: usize, values: &[f64]) {
        assert_eq!(values.len(), self.dim);
        let row = &mut self.classes[l * self.dim..(l + 1) * self.dim];
        row.copy_from_slice(values);
        self.norms[l] = norm(row);
    }

    /// Multiplies class `l` by `factor`.
    pub fn scale_class(&mut self, l: usize, factor: f64) {
        let row = &mut self.classes[l * self.dim..(l + 1) * self.dim];
        row.iter_mut().for_each(|c| *c *= factor);
        self.norms[l] = norm(row);
    }

    /// Sets the given dimensions to zero in every class.
    pub fn zero_dims(&mut self, dims: &[usize]) {
        for l in 0..self.labels.len() {
            let row = &mut self.classes[l * self.dim..(l + 1) * self.dim];
            for &i in dims {
                row[i] = 0.0;
            }
            self.norms[l] = norm(row);
        }
    }

    /// Applies `f(class, dim, value)` to every entry.
    pub fn map_entries(&mut self, mut f: impl FnMut(usize, usize, f64) -> f64) {
        for l in 0..self.labels.len() {
            let row = &mut self.classes[l * self.dim..(l + 1) * self.dim];
            for (i, c) in row.iter_mut().enumerate() {
                *c = f(l, i, *c);
            }
            self.norms[l] = norm(row);
        }
    }

    /// Class `l` scaled to unit length, or all zeros for a zero class.
    pub fn unit_class(&self, l: usize) -> Vec<f64> {
        let nrm = self.norms[l];
        if nrm == 0.0 {
            vec![0.0; self.dim]
        } else {
            self.class(l).iter().map(|c| c / nrm).collect()
        }
    }
}

/// Which undesired-dimension detector produced a plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// No regeneration.
    None,
    Insignificant,
    Misleading,
    DomainVariant,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Insignificant => "insignificant",
            Strategy::Misleading => "misleading",
            Strategy::DomainVariant => "domain_variant",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = HdcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Strategy::None),
            "insignificant" => Ok(Strategy::Insignificant),
            "misleading" => Ok(Strategy::Misleading),
            "domain_variant" | "domain-variant" => Ok(Strategy::DomainVariant),
            other => Err(HdcError::invalid(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Dimensions selected for regeneration and the evidence behind them.
///
/// `scores` is oriented so that higher means stronger evidence for
/// regeneration (variance scores are negated for the insignificance detector).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegenPlan {
    indices: Vec<usize>,
    scores: Vec<f64>,
    strategy: Strategy,
    rate: f64,
}

impl RegenPlan {
    pub fn new(indices: Vec<usize>, scores: Vec<f64>, strategy: Strategy, rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(HdcError::invalid(format!("rate {rate} outside [0, 1]")));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HdcError::invalid("plan indices must be strictly increasing"));
        }
        Ok(Self {
            indices,
            scores,
            strategy,
            rate,
        })
    }

    /// A plan that regenerates exactly `indices`, with no score evidence.
    pub fn from_indices(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self {
            indices,
            scores: Vec::new(),
            strategy: Strategy::None,
            rate: 0.0,
        }
    }

    pub fn empty() -> Self {
        Self::from_indices(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }
}

/// Number of dimensions a rate selects out of `dim`: `floor(rate * dim)`.
///
/// A small slack absorbs products like `0.29 * 100` landing just under an
/// integer.
pub fn selection_count(rate: f64, dim: usize) -> usize {
    ((rate * dim as f64 + 1e-9).floor() as usize).min(dim)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub label: usize,
    pub domain: Option<usize>,
}

/// An ordered collection of labeled samples.
///
/// Labels and domains are dense ids into `label_names` / `domain_names`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n_features: usize,
    pub label_names: Vec<String>,
    pub domain_names: Vec<String>,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(n_features: usize, label_names: Vec<String>, domain_names: Vec<String>) -> Self {
        Self {
            n_features,
            label_names,
            domain_names,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn num_domains(&self) -> usize {
        self.domain_names.len()
    }

    /// True when every sample carries a domain id.
    pub fn has_domains(&self) -> bool {
        !self.domain_names.is_empty() && self.samples.iter().all(|s| s.domain.is_some())
    }

    /// Same metadata, chosen samples (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            n_features: self.n_features,
            label_names: self.label_names.clone(),
            domain_names: self.domain_names.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Re-expresses labels against `names` (e.g. a model's label order).
    pub fn remap_labels(&self, names: &[String]) -> Result<Dataset> {
        let lookup: Vec<usize> = self
            .label_names
            .iter()
            .map(|name| {
                names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| HdcError::invalid(format!("label {name:?} not known to the model")))
            })
            .collect::<Result<_>>()?;
        let mut out = self.clone();
        out.label_names = names.to_vec();
        for s in &mut out.samples {
            s.label = lookup[s.label];
        }
        Ok(out)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_names.len()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationIssue {
    NonFiniteFeature,
    WrongFeatureCount,
    LabelOutOfSet,
    DomainOutOfSet,
    DuplicateLabelName,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValidationIssue::NonFiniteFeature => "non-finite feature",
            ValidationIssue::WrongFeatureCount => "wrong feature count",
            ValidationIssue::LabelOutOfSet => "label out of set",
            ValidationIssue::DomainOutOfSet => "domain out of set",
            ValidationIssue::DuplicateLabelName => "duplicate label name",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationFailure {
    pub sample: Option<usize>,
    pub issue: ValidationIssue,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn has(&self, issue: ValidationIssue) -> bool {
        self.failures.iter().any(|f| f.issue == issue)
    }
}

pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen = HashSet::new();
    if d.label_names.iter().any(|l| !seen.insert(l.as_str())) {
        report.failures.push(ValidationFailure {
            sample: None,
            issue: ValidationIssue::DuplicateLabelName,
        });
    }
    for (i, s) in d.samples.iter().enumerate() {
        let mut flag = |issue| report.failures.push(ValidationFailure { sample: Some(i), issue });
        if s.features.len() != d.n_features {
            flag(ValidationIssue::WrongFeatureCount);
        }
        if !s.features.is_finite() {
            flag(ValidationIssue::NonFiniteFeature);
        }
        if s.label >= d.label_names.len() {
            flag(ValidationIssue::LabelOutOfSet);
        }
        if let Some(dom) = s.domain {
            if dom >= d.domain_names.len() {
                flag(ValidationIssue::DomainOutOfSet);
            }
        }
    }
    report
}
