//! One (learner, calibrator, dataset, fold) cell of the benchmark grid.

use std::time::Instant;

use crate::calibrators::{fit_calibrator, CalibratorKind, DEFAULT_ALPHA};
use crate::data::{derive_seed, derive_task_seed, BinaryLabeledScores, DatasetTable, RunKey, TrueConditionals};
use crate::error::{Error, Result};
use crate::learners::{fit_learner, predict_scores, LearnerKind};
use crate::metrics::{MetricReport, PhaseTimings};

use super::folds::{holdout_calibration_split, FoldAssignment};

/// Calibrator id of the uncalibrated arm.
pub const NONE_ARM: &str = "none";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellConfig {
    pub k: usize,
    pub cal_fraction: f64,
    pub master_seed: u64,
    pub threshold: f64,
    pub clip_eps: f64,
    pub alpha: f64,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            k: 5,
            cal_fraction: 0.2,
            master_seed: 0,
            threshold: 0.5,
            clip_eps: 1e-15,
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// Externally produced scores for one fold.
#[derive(Debug, Clone)]
pub struct PrecomputedFold {
    pub cal: Option<BinaryLabeledScores>,
    pub test: BinaryLabeledScores,
    pub truth: Option<TrueConditionals>,
}

/// Where a cell gets its scores from.
#[derive(Debug, Clone, Copy)]
pub enum CellSource<'a> {
    /// A feature table scored by a built-in learner; `folds` belongs to the
    /// repeat that `RunKey::fold` falls in.
    Table {
        table: &'a DatasetTable,
        truth: Option<&'a TrueConditionals>,
        folds: &'a FoldAssignment,
    },
    Precomputed(&'a PrecomputedFold),
}

/// Seconds of CPU time consumed by the calling thread.
fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec for the duration of the call.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64, f64)> {
    let wall = Instant::now();
    let cpu = thread_cpu_seconds();
    let out = f()?;
    Ok((out, wall.elapsed().as_secs_f64(), thread_cpu_seconds() - cpu))
}

fn parse_arm(calibrator_id: &str) -> Result<Option<CalibratorKind>> {
    if calibrator_id == NONE_ARM {
        Ok(None)
    } else {
        calibrator_id.parse().map(Some)
    }
}

fn labelled(scores: Vec<f64>, table: &DatasetTable, indices: &[usize]) -> Result<BinaryLabeledScores> {
    let labels = indices.iter().map(|&i| table.labels()[i]).collect();
    BinaryLabeledScores::new(scores, labels)
}

fn check_disjoint(n: usize, test: &[usize], others: &[&[usize]]) -> Result<()> {
    let mut in_test = vec![false; n];
    for &i in test {
        in_test[i] = true;
    }
    for set in others {
        if let Some(&i) = set.iter().find(|&&i| in_test[i]) {
            return Err(Error::invalid(format!("instance {i} is in both the test fold and a training split")));
        }
    }
    Ok(())
}

/// Fits and evaluates one cell, returning metrics on the held-out test fold.
///
/// The uncalibrated arm fits the learner on all training folds. A calibrated
/// arm fits it on the fit part of the holdout split only and the calibrator on
/// the calibration part; the split is shared by every arm of the same
/// (dataset, fold).
pub fn run_cell(key: &RunKey, source: CellSource<'_>, config: &CellConfig) -> Result<MetricReport> {
    let arm = parse_arm(&key.calibrator_id)?;
    match source {
        CellSource::Table { table, truth, folds } => run_table_cell(key, arm, table, truth, folds, config),
        CellSource::Precomputed(fold) => run_precomputed_cell(arm, fold, config),
    }
}

fn run_table_cell(
    key: &RunKey,
    arm: Option<CalibratorKind>,
    table: &DatasetTable,
    truth: Option<&TrueConditionals>,
    folds: &FoldAssignment,
    config: &CellConfig,
) -> Result<MetricReport> {
    if key.fold == 0 {
        return Err(Error::invalid("fold ids start at 1"));
    }
    if folds.fold_of.len() != table.len() {
        return Err(Error::DimensionMismatch {
            expected: table.len(),
            got: folds.fold_of.len(),
        });
    }
    let learner: LearnerKind = key.learner_id.parse()?;
    let local_fold = (key.fold - 1) % folds.k + 1;
    let test_idx = folds.test_indices(local_fold);
    let train_idx = folds.train_indices(local_fold);
    if test_idx.is_empty() {
        return Err(Error::invalid(format!("fold {} has no test instances", key.fold)));
    }
    let test = table.subset(&test_idx);
    let test_truth = truth.map(|t| t.subset(&test_idx));
    let learner_seed = derive_task_seed(config.master_seed, key);
    let mut timings = PhaseTimings::default();

    let scores = match arm {
        None => {
            check_disjoint(table.len(), &test_idx, &[&train_idx])?;
            let train = table.subset(&train_idx);
            let (model, wall, cpu) = timed(|| fit_learner(learner, &train, learner_seed))?;
            timings.train_wall = wall;
            timings.train_cpu = cpu;
            let (scores, wall, cpu) = timed(|| predict_scores(&model, &test))?;
            timings.inference_wall = wall;
            timings.inference_cpu = cpu;
            scores
        }
        Some(kind) => {
            let split_seed = derive_seed(
                config.master_seed,
                &["calibration-split", &key.dataset_id, &key.fold.to_string()],
            );
            let (fit_idx, cal_idx) =
                holdout_calibration_split(&train_idx, table.labels(), config.cal_fraction, split_seed)?;
            check_disjoint(table.len(), &test_idx, &[&fit_idx, &cal_idx])?;
            let fit = table.subset(&fit_idx);
            let cal_rows = table.subset(&cal_idx);
            let (model, wall, cpu) = timed(|| fit_learner(learner, &fit, learner_seed))?;
            timings.train_wall = wall;
            timings.train_cpu = cpu;
            let (calibrator, wall, cpu) = timed(|| {
                let cal = labelled(predict_scores(&model, &cal_rows)?, table, &cal_idx)?;
                fit_calibrator(kind, &cal, config.alpha)
            })?;
            timings.calibrate_wall = wall;
            timings.calibrate_cpu = cpu;
            let (scores, wall, cpu) = timed(|| Ok(calibrator.apply_many(&predict_scores(&model, &test)?)))?;
            timings.inference_wall = wall;
            timings.inference_cpu = cpu;
            scores
        }
    };
    let data = labelled(scores, table, &test_idx)?;
    let mut report = MetricReport::compute(&data, test_truth.as_ref(), config.threshold, config.clip_eps)?;
    report.timings = timings;
    Ok(report)
}

fn run_precomputed_cell(
    arm: Option<CalibratorKind>,
    fold: &PrecomputedFold,
    config: &CellConfig,
) -> Result<MetricReport> {
    let mut timings = PhaseTimings::default();
    let data = match arm {
        None => fold.test.clone(),
        Some(kind) => {
            let cal = fold
                .cal
                .as_ref()
                .ok_or_else(|| Error::invalid("score file has no calibration split for this fold"))?;
            let (calibrator, wall, cpu) = timed(|| fit_calibrator(kind, cal, config.alpha))?;
            timings.calibrate_wall = wall;
            timings.calibrate_cpu = cpu;
            let (scores, wall, cpu) = timed(|| Ok(calibrator.apply_many(fold.test.scores())))?;
            timings.inference_wall = wall;
            timings.inference_cpu = cpu;
            fold.test.with_scores(scores)?
        }
    };
    let mut report = MetricReport::compute(&data, fold.truth.as_ref(), config.threshold, config.clip_eps)?;
    report.timings = timings;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::folds::stratified_kfold;
    use crate::synth::{generate, SynthKind, SynthSpec};

    fn twonorm(n: usize, seed: u64) -> (DatasetTable, TrueConditionals) {
        generate(&SynthSpec::new(SynthKind::Twonorm, n, 5, seed).unwrap()).unwrap()
    }

    #[test]
    fn class_prior_scores_are_constant_base_rate() {
        let (table, truth) = twonorm(200, 1);
        let folds = stratified_kfold(table.labels(), 5, 7, false).unwrap();
        let key = RunKey::new("class_prior", "none", table.dataset_id.clone(), 2);
        let r = run_cell(&key, CellSource::Table { table: &table, truth: Some(&truth), folds: &folds }, &CellConfig::default())
            .unwrap();
        let train = folds.train_indices(2);
        let rate = train.iter().filter(|&&i| table.labels()[i] == 1).count() as f64 / train.len() as f64;
        let test = folds.test_indices(2);
        let expected: f64 = test
            .iter()
            .map(|&i| (f64::from(table.labels()[i]) - rate).powi(2))
            .sum::<f64>()
            / test.len() as f64;
        assert!((r.brier - expected).abs() < 1e-15);
        assert_eq!(r.auc_roc, Some(0.5));
    }

    #[test]
    fn deterministic_metrics() {
        let (table, truth) = twonorm(300, 2);
        let folds = stratified_kfold(table.labels(), 5, 3, false).unwrap();
        let source = CellSource::Table { table: &table, truth: Some(&truth), folds: &folds };
        for cal in ["none", "platt", "isotonic", "beta", "venn_abers", "pearsonify"] {
            let key = RunKey::new("logistic", cal, table.dataset_id.clone(), 3);
            let a = run_cell(&key, source, &CellConfig::default()).unwrap();
            let b = run_cell(&key, source, &CellConfig::default()).unwrap();
            assert_eq!(a.log_loss.to_bits(), b.log_loss.to_bits());
            assert_eq!(a.ece.to_bits(), b.ece.to_bits());
            assert_eq!(a.true_calibration, b.true_calibration);
        }
    }

    #[test]
    fn calibrated_arms_stay_near_uncalibrated_logistic() {
        let (table, truth) = twonorm(2000, 5);
        let folds = stratified_kfold(table.labels(), 5, 11, false).unwrap();
        let source = CellSource::Table { table: &table, truth: Some(&truth), folds: &folds };
        // Monte Carlo Bayes loss on the same test fold
        let test = folds.test_indices(1);
        let bayes: f64 = test
            .iter()
            .map(|&i| {
                let q = truth.values()[i];
                if table.labels()[i] == 1 { -q.ln() } else { -(1.0 - q).ln() }
            })
            .sum::<f64>()
            / test.len() as f64;
        let run = |arm: &str| run_cell(&RunKey::new("logistic", arm, "t", 1), source, &CellConfig::default()).unwrap();
        let base = run("none");
        assert!((base.log_loss - bayes).abs() < 0.05);
        for arm in ["venn_abers", "beta"] {
            let r = run(arm);
            assert!((r.log_loss - base.log_loss).abs() < 0.05, "{arm}: {} vs {}", r.log_loss, base.log_loss);
        }
        // isotonic maps its outermost blocks to exactly 0 or 1, so a single
        // unlucky test label costs the full clip penalty under log-loss
        let iso = run("isotonic");
        assert!((iso.brier - base.brier).abs() < 0.01, "{} vs {}", iso.brier, base.brier);
    }

    #[test]
    fn unknown_ids_are_errors() {
        let (table, _) = twonorm(50, 1);
        let folds = stratified_kfold(table.labels(), 5, 1, false).unwrap();
        let source = CellSource::Table { table: &table, truth: None, folds: &folds };
        assert!(run_cell(&RunKey::new("forest", "none", "t", 1), source, &CellConfig::default()).is_err());
        assert!(run_cell(&RunKey::new("logistic", "spline", "t", 1), source, &CellConfig::default()).is_err());
    }

    #[test]
    fn folds_beyond_k_map_to_later_repeats() {
        let (table, _) = twonorm(100, 4);
        let folds = stratified_kfold(table.labels(), 5, 1, false).unwrap();
        let source = CellSource::Table { table: &table, truth: None, folds: &folds };
        let a = run_cell(&RunKey::new("gaussian_nb", "none", "t", 2), source, &CellConfig::default()).unwrap();
        let b = run_cell(&RunKey::new("gaussian_nb", "none", "t", 7), source, &CellConfig::default()).unwrap();
        assert_eq!(a.brier, b.brier);
    }

    #[test]
    fn precomputed_cells() {
        let cal = BinaryLabeledScores::new(vec![0.1, 0.4, 0.6, 0.9], vec![0, 0, 1, 1]).unwrap();
        let test = BinaryLabeledScores::new(vec![0.2, 0.8], vec![0, 1]).unwrap();
        let fold = PrecomputedFold { cal: Some(cal), test, truth: None };
        let key = RunKey::new("external", "isotonic", "d", 1);
        let r = run_cell(&key, CellSource::Precomputed(&fold), &CellConfig::default()).unwrap();
        assert_eq!(r.n, 2);
        let none = run_cell(&RunKey::new("external", "none", "d", 1), CellSource::Precomputed(&fold), &CellConfig::default())
            .unwrap();
        assert!((none.brier - 0.04).abs() < 1e-15);
    }
}
