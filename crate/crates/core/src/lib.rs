//! Pump-and-dump detection on exchange trade streams: trade chunking and
//! labeling, rolling window features, SMOTE oversampling, five tree
//! ensembles, evaluation harness and a synthetic market generator.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod learners;
pub mod resample;
pub mod rng;
pub mod synth;

pub use dataset::{Dataset, Matrix};
pub use error::{Error, Result};
