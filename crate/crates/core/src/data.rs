//! CSV ingestion, z-score normalization, splits and synthetic blob data.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HdcError, Result};
use crate::model::{Dataset, FeatureVector, LabeledSample};
use crate::rng::{streams, DrawStream};

/// Smallest standard deviation used when scaling a feature.
pub const MIN_STD: f64 = 1e-12;

fn intern(names: &mut Vec<String>, name: &str) -> usize {
    match names.iter().position(|n| n == name) {
        Some(i) => i,
        None => {
            names.push(name.to_string());
            names.len() - 1
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, label_column: &str, domain_column: Option<&str>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, label_column, domain_column)
}

/// Parses a headed CSV. Every column other than the label and domain columns
/// is a numeric feature, in header order. Label and domain names get dense
/// ids in order of first appearance. Errors name the 1-based file line.
pub fn read_csv(reader: impl Read, label_column: &str, domain_column: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let parse_err = |line: u64, message: String| HdcError::Parse { line, message };
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| parse_err(1, format!("missing column {name:?}")))
    };
    let label_idx = find(label_column)?;
    let domain_idx = domain_column.map(find).transpose()?;
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&i| i != label_idx && Some(i) != domain_idx)
        .collect();

    let mut d = Dataset::new(feature_idx.len(), Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut values = Vec::with_capacity(feature_idx.len());
        for &i in &feature_idx {
            let cell = record[i].trim();
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("non-numeric value {cell:?} in column {:?}", &headers[i])))?;
            values.push(v);
        }
        let label = intern(&mut d.label_names, record[label_idx].trim());
        let domain = domain_idx.map(|i| intern(&mut d.domain_names, record[i].trim()));
        d.samples.push(LabeledSample {
            features: values.into(),
            label,
            domain,
        });
    }
    Ok(d)
}

/// Writes features as `f0..f{n-1}`, then `label` and, when present, `domain`.
pub fn write_csv(d: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let with_domain = d.has_domains();
    let mut header: Vec<String> = (0..d.n_features).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    if with_domain {
        header.push("domain".into());
    }
    w.write_record(&header).map_err(|e| HdcError::Io(e.into()))?;
    for s in &d.samples {
        let mut row: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
        row.push(d.label_names[s.label].clone());
        if let (true, Some(dom)) = (with_domain, s.domain) {
            row.push(d.domain_names[dom].clone());
        }
        w.write_record(&row).map_err(|e| HdcError::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// Per-feature z-score parameters fitted on a training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    /// Population standard deviation, clamped to at least [`MIN_STD`].
    pub std: Vec<f64>,
}

pub fn fit_normalizer(train: &Dataset) -> Result<NormalizationStats> {
    if train.is_empty() {
        return Err(HdcError::invalid("cannot fit a normalizer on an empty dataset"));
    }
    let n = train.n_features;
    let count = train.len() as f64;
    let mut mean = vec![0.0; n];
    for s in &train.samples {
        for (m, v) in mean.iter_mut().zip(s.features.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; n];
    for s in &train.samples {
        for ((acc, v), m) in var.iter_mut().zip(s.features.iter()).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|v| (v / count).sqrt().max(MIN_STD)).collect();
    Ok(NormalizationStats { mean, std })
}

impl NormalizationStats {
    pub fn apply_one(&self, f: &[f64]) -> FeatureVector {
        f.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect::<Vec<_>>()
            .into()
    }
}

pub fn apply_normalizer(stats: &NormalizationStats, d: &Dataset) -> Result<Dataset> {
    if stats.mean.len() != d.n_features {
        return Err(HdcError::invalid("normalizer feature count differs from dataset"));
    }
    let mut out = d.clone();
    for s in &mut out.samples {
        s.features = stats.apply_one(&s.features);
    }
    Ok(out)
}

/// Parameters for Gaussian blob data with optional per-domain shifts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_features: usize,
    pub n_classes: usize,
    pub n_domains: usize,
    pub samples_per_class_per_domain: usize,
    /// Scale of the class centers (centers are `separation * N(0, I)`).
    pub separation: f64,
    pub intra_class_std: f64,
    pub domain_offset_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_features: 16,
            n_classes: 8,
            n_domains: 1,
            samples_per_class_per_domain: 100,
            separation: 1.0,
            intra_class_std: 1.0,
            domain_offset_std: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 || self.n_classes == 0 || self.n_domains == 0 || self.samples_per_class_per_domain == 0
        {
            return Err(HdcError::invalid("synthetic counts must all be >= 1"));
        }
        let stds = [self.separation, self.intra_class_std, self.domain_offset_std];
        if stds.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(HdcError::invalid("synthetic scales must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Samples `center[class] + offset[domain] + intra_class_std * N(0, I)`.
///
/// Centers are drawn first, then domain offsets, then samples. Samples are
/// ordered domain-major, then round-robin over classes, so consecutive
/// samples cycle through the labels.
pub fn make_blobs(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n_features;
    let mut rng = DrawStream::new(spec.seed, streams::SYNTH);
    let mut draw = |scale: f64| -> Vec<f64> { (0..n).map(|_| scale * rng.gaussian()).collect() };
    let centers: Vec<Vec<f64>> = (0..spec.n_classes).map(|_| draw(spec.separation)).collect();
    let offsets: Vec<Vec<f64>> = (0..spec.n_domains).map(|_| draw(spec.domain_offset_std)).collect();

    let label_names = (0..spec.n_classes).map(|l| format!("c{l}")).collect();
    let domain_names = (0..spec.n_domains).map(|m| format!("d{m}")).collect();
    let mut d = Dataset::new(n, label_names, domain_names);
    for (domain, offset) in offsets.iter().enumerate() {
        for _ in 0..spec.samples_per_class_per_domain {
            for (label, center) in centers.iter().enumerate() {
                let noise = draw(spec.intra_class_std);
                let features: Vec<f64> = center
                    .iter()
                    .zip(offset)
                    .zip(noise)
                    .map(|((c, o), e)| c + o + e)
                    .collect();
                d.samples.push(LabeledSample {
                    features: features.into(),
                    label,
                    domain: Some(domain),
                });
            }
        }
    }
    Ok(d)
}

/// Seeded split stratified by class.
///
/// Within each class the samples are shuffled and the first parts receive
/// `floor(fraction * class_size)` samples; the last part takes the rest.
/// Each part keeps the original dataset order.
pub fn split(d: &Dataset, fractions: &[f64], seed: u64) -> Result<Vec<Dataset>> {
    if fractions.is_empty() || fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(HdcError::invalid("fractions must lie in [0, 1]"));
    }
    if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(HdcError::invalid("fractions must sum to 1"));
    }
    let mut rng = DrawStream::new(seed, streams::SPLIT);
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); fractions.len()];
    for class in 0..d.num_classes() {
        let mut members: Vec<usize> = (0..d.len()).filter(|&i| d.samples[i].label == class).collect();
        rng.shuffle(&mut members);
        let total = members.len();
        let mut start = 0;
        for (p, f) in fractions.iter().enumerate() {
            let take = if p + 1 == fractions.len() {
                total - start
            } else {
                ((f * total as f64 + 1e-9).floor() as usize).min(total - start)
            };
            parts[p].extend_from_slice(&members[start..start + take]);
            start += take;
        }
    }
    Ok(parts
        .into_iter()
        .map(|mut idx| {
            idx.sort_unstable();
            d.subset(&idx)
        })
        .collect())
}

pub fn train_test_split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut parts = split(d, &[train_fraction, 1.0 - train_fraction], seed)?.into_iter();
    Ok((parts.next().unwrap(), parts.next().unwrap()))
}

/// Training set of all other domains, test set of `held_domain`.
pub fn leave_one_domain_out(d: &Dataset, held_domain: usize) -> Result<(Dataset, Dataset)> {
    if held_domain >= d.num_domains() || !d.has_domains() {
        return Err(HdcError::invalid(format!("domain {held_domain} does not exist")));
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..d.len()).partition(|&i| d.samples[i].domain == Some(held_domain));
    Ok((d.subset(&train), d.subset(&test)))
}
