//! Hyperdimensional classification with dynamic encoder adaptation.
//!
//! Samples are encoded with a random nonlinear projection
//! (`h_i = cos(B_i·F + c_i) · sin(B_i·F)`), bundled into class hypervectors
//! and refined with similarity-weighted corrections. Between training rounds
//! a detector picks undesired dimensions (insignificant, misleading or
//! domain-variant), their random bases are redrawn, and training resumes at
//! the same dimensionality.

pub mod analysis;
pub mod data;
pub mod encoder;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod model;
pub mod persist;
pub mod rng;
pub mod trainer;

pub use error::{HdcError, Result};
pub use model::{
    validate_dataset, ClassModel, Dataset, EncoderState, FeatureVector, Hypervector, LabeledSample, RegenPlan,
    Strategy, ValidationReport,
};
pub use persist::ModelFile;
pub use trainer::{train, TrainConfig, TrainOutcome, TrainReport};
