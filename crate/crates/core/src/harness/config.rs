use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ingest::IngestOptions;
use crate::calibrators::{CalibratorKind, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::eval::CellConfig;
use crate::learners::LearnerKind;
use crate::synth::SynthSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DatasetSource {
    Csv { path: PathBuf, options: IngestOptions },
    Synth { spec: SynthSpec },
    /// Precomputed scores of an external model, run under `learner_id`.
    Scores { path: PathBuf, learner_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub datasets: Vec<DatasetSource>,
    pub learners: Vec<LearnerKind>,
    pub calibrators: Vec<CalibratorKind>,
    pub k: usize,
    pub repeats: usize,
    pub cal_fraction: f64,
    pub master_seed: u64,
    pub threshold: f64,
    pub clip_eps: f64,
    pub alpha: f64,
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
    pub out: PathBuf,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            learners: LearnerKind::ALL.to_vec(),
            calibrators: CalibratorKind::ALL.to_vec(),
            k: 5,
            repeats: 1,
            cal_fraction: 0.2,
            master_seed: 0,
            threshold: 0.5,
            clip_eps: 1e-15,
            alpha: DEFAULT_ALPHA,
            jobs: None,
            out: PathBuf::from("calbench-out"),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::invalid("no datasets configured"));
        }
        let needs_learners = self.datasets.iter().any(|d| !matches!(d, DatasetSource::Scores { .. }));
        if needs_learners && self.learners.is_empty() {
            return Err(Error::invalid("no learners configured"));
        }
        if self.k < 2 {
            return Err(Error::invalid(format!("k must be at least 2, got {}", self.k)));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be at least 1"));
        }
        if !(self.cal_fraction > 0.0 && self.cal_fraction < 1.0) {
            return Err(Error::invalid(format!("cal_fraction {} must lie in (0, 1)", self.cal_fraction)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::invalid(format!("threshold {} must lie in [0, 1]", self.threshold)));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 0.5) {
            return Err(Error::invalid(format!("clip_eps {} must lie in (0, 0.5)", self.clip_eps)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha {} must lie in (0, 1)", self.alpha)));
        }
        if self.jobs == Some(0) {
            return Err(Error::invalid("jobs must be at least 1"));
        }
        Ok(())
    }

    pub fn cell_config(&self) -> CellConfig {
        CellConfig {
            k: self.k,
            cal_fraction: self.cal_fraction,
            master_seed: self.master_seed,
            threshold: self.threshold,
            clip_eps: self.clip_eps,
            alpha: self.alpha,
        }
    }

    /// Calibrator ids of every arm, the uncalibrated one first.
    pub fn arms(&self) -> Vec<String> {
        std::iter::once(crate::eval::NONE_ARM.to_string())
            .chain(self.calibrators.iter().map(|c| c.id().to_string()))
            .collect()
    }
}
