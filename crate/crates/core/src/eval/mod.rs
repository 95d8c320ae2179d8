//! The evaluation protocol: stratified folds, the calibration holdout,
//! per-cell runs, change measures and rank aggregation.

pub mod cell;
pub mod delta;
pub mod folds;
pub mod measures;
pub mod rank;

pub use cell::{run_cell, CellConfig, CellSource, PrecomputedFold, NONE_ARM};
pub use delta::{delta, DeltaRecord};
pub use folds::{holdout_calibration_split, stratified_kfold, FoldAssignment};
pub use measures::{Direction, Measure};
pub use rank::{expected_rank, expected_rank_available, rank_within, RankTable};
