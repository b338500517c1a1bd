//! Progression-prediction toolkit for longitudinal knee cohorts.
//!
//! The crate covers the whole modelling pipeline: loading cohorts and
//! expanding them into observation periods, labelling periods by pain and
//! structural progression, fold-local preprocessing, cost-sensitive random
//! forests and their multi-model compositions, resampling-based evaluation,
//! recursive feature elimination, exact tree Shapley attributions and
//! simulated patient selection. A synthetic cohort generator provides
//! desk-scale data for every stage.

pub mod cohort;
pub mod dataset;
pub mod error;
pub mod explain;
pub mod eval;
pub mod forest;
pub mod labeling;
pub mod matrix;
pub mod preprocess;
pub mod rfe;
pub mod seed;
pub mod select;
pub mod strategies;
pub mod synth;

pub use error::{Error, Result};
