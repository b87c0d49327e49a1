//! Ablation curves over a trained model: dropping dimensions by variance
//! rank, and accuracy under model noise.

use serde::{Deserialize, Serialize};

use crate::analysis::variance_over_classes;
use crate::error::{HdcError, Result};
use crate::inference::{count_topk_hits, perturb_model};
use crate::model::{selection_count, ClassModel, Dataset, EncoderState, Hypervector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropOrder {
    Lowest,
    Highest,
}

impl std::str::FromStr for DropOrder {
    type Err = HdcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowest" => Ok(DropOrder::Lowest),
            "highest" => Ok(DropOrder::Highest),
            other => Err(HdcError::invalid(format!("unknown drop order {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub accuracy: f64,
}

/// Encodes `data` once and labels it against `model`.
pub struct EvalSet {
    encoded: Vec<Hypervector>,
    labels: Vec<usize>,
}

impl EvalSet {
    pub fn new(encoder: &EncoderState, model: &ClassModel, data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(HdcError::invalid("empty dataset"));
        }
        if encoder.dim() != model.dim() {
            return Err(HdcError::invalid("encoder and model dimensionality differ"));
        }
        if data.samples.iter().any(|s| s.label >= model.num_classes()) {
            return Err(HdcError::invalid("sample label outside model label set"));
        }
        let features: Vec<_> = data.samples.iter().map(|s| s.features.clone()).collect();
        Ok(Self {
            encoded: encoder.encode_batch(&features)?,
            labels: data.samples.iter().map(|s| s.label).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn topk_accuracy(&self, model: &ClassModel, k: usize) -> Result<f64> {
        if k == 0 || k > model.num_classes() {
            return Err(HdcError::invalid(format!(
                "k = {k} outside [1, {}]",
                model.num_classes()
            )));
        }
        Ok(count_topk_hits(model, &self.encoded, &self.labels, k) as f64 / self.len() as f64)
    }

    /// Top-1 accuracy with `dims` zeroed in both the model and every query.
    pub fn accuracy_without(&self, model: &ClassModel, dims: &[usize]) -> f64 {
        let mut masked_model = model.clone();
        masked_model.zero_dims(dims);
        let masked: Vec<Hypervector> = self
            .encoded
            .iter()
            .map(|h| {
                let mut h = h.clone();
                for &i in dims {
                    h.as_mut_slice()[i] = 0.0;
                }
                h
            })
            .collect();
        count_topk_hits(&masked_model, &masked, &self.labels, 1) as f64 / self.len() as f64
    }
}

/// Dimensions sorted by class variance; `Lowest` puts the smallest first.
/// Ties go to the lower index.
pub fn variance_order(model: &ClassModel, order: DropOrder) -> Result<Vec<usize>> {
    let var = variance_over_classes(model)?;
    let mut idx: Vec<usize> = (0..var.len()).collect();
    match order {
        DropOrder::Lowest => idx.sort_by(|&a, &b| var[a].partial_cmp(&var[b]).unwrap()),
        DropOrder::Highest => idx.sort_by(|&a, &b| var[b].partial_cmp(&var[a]).unwrap()),
    }
    Ok(idx)
}

/// Top-1 accuracy after zeroing the first `floor(f * D)` dimensions of the
/// variance ordering, for each fraction `f`.
pub fn drop_sweep(model: &ClassModel, eval: &EvalSet, fractions: &[f64], order: DropOrder) -> Result<Vec<CurvePoint>> {
    let ranked = variance_order(model, order)?;
    fractions
        .iter()
        .map(|&f| {
            if !(0.0..=1.0).contains(&f) {
                return Err(HdcError::invalid(format!("fraction {f} outside [0, 1]")));
            }
            let count = selection_count(f, model.dim());
            Ok(CurvePoint {
                x: f,
                accuracy: eval.accuracy_without(model, &ranked[..count]),
            })
        })
        .collect()
}

/// Top-1 accuracy of `perturb_model(model, q, magnitude, seed)` for each `q`.
pub fn noise_sweep(
    model: &ClassModel,
    eval: &EvalSet,
    fractions: &[f64],
    magnitude: f64,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    fractions
        .iter()
        .map(|&q| {
            let noisy = perturb_model(model, q, magnitude, seed)?;
            Ok(CurvePoint {
                x: q,
                accuracy: eval.topk_accuracy(&noisy, 1)?,
            })
        })
        .collect()
}
