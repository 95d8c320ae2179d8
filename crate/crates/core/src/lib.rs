//! Post-hoc probability calibration for binary classifiers.
//!
//! The crate bundles five calibrators (Platt, isotonic, Beta, Venn–Abers and a
//! Pearson-residual conformal band), a calibration/discrimination metric suite,
//! synthetic datasets with known conditional probabilities, and a stratified
//! cross-validation harness that aggregates results into expected ranks.

pub mod binning;
pub mod calibrators;
pub mod data;
pub mod error;
pub mod eval;
pub mod harness;
pub mod learners;
pub mod metrics;
pub mod synth;

pub use data::{BinaryLabeledScores, DatasetTable, RunKey, TrueConditionals};
pub use error::{Error, Result};
