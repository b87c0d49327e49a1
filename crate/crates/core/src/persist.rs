//! JSON model file: encoder, class model and the feature normalizer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::NormalizationStats;
use crate::error::{HdcError, Result};
use crate::model::{ClassModel, EncoderState};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk layout. Matrices are flattened row-major; indices are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub n: usize,
    #[serde(rename = "D")]
    pub dim: usize,
    pub seed: u64,
    pub draw_counter: u64,
    pub bases: Vec<f64>,
    pub phases: Vec<f64>,
    pub labels: Vec<String>,
    pub classes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationStats>,
}

impl ModelFile {
    pub fn new(encoder: &EncoderState, model: &ClassModel, normalization: Option<NormalizationStats>) -> Self {
        Self {
            version: MODEL_FORMAT_VERSION,
            n: encoder.n(),
            dim: encoder.dim(),
            seed: encoder.seed(),
            draw_counter: encoder.draw_counter(),
            bases: encoder.bases().to_vec(),
            phases: encoder.phases().to_vec(),
            labels: model.labels().to_vec(),
            classes: model.as_flat().to_vec(),
            normalization,
        }
    }

    pub fn into_parts(self) -> Result<(EncoderState, ClassModel, Option<NormalizationStats>)> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(HdcError::invalid(format!("unsupported model version {}", self.version)));
        }
        if let Some(stats) = &self.normalization {
            if stats.mean.len() != self.n || stats.std.len() != self.n {
                return Err(HdcError::invalid("normalizer length differs from n"));
            }
        }
        let encoder =
            EncoderState::from_parts(self.n, self.dim, self.seed, self.draw_counter, self.bases, self.phases)?;
        let model = ClassModel::from_parts(self.labels, self.dim, self.classes)?;
        Ok((encoder, model, self.normalization))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
