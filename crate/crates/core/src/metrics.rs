//! Scalar performance measures on a test split.

use serde::{Deserialize, Serialize};

use crate::binning::{msm_partition, BinPartition};
use crate::data::{clip, BinaryLabeledScores, TrueConditionals};
use crate::error::{Error, Result};

/// Mean of `(y - p)²` over the split.
pub fn brier(data: &BinaryLabeledScores) -> f64 {
    data.iter().map(|(p, y)| (f64::from(y) - p).powi(2)).sum::<f64>() / data.len() as f64
}

/// Mean negative natural log of the clipped probability given to the true class.
pub fn log_loss(data: &BinaryLabeledScores, clip_eps: f64) -> f64 {
    data.iter()
        .map(|(p, y)| {
            let p = clip(p, clip_eps);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / data.len() as f64
}

/// Spiegelhalter's Z; `None` when the variance term is zero (e.g. all `p = 0.5`).
pub fn spiegelhalter_z(data: &BinaryLabeledScores) -> Option<f64> {
    let (num, var) = data.iter().fold((0.0, 0.0), |(num, var), (p, y)| {
        let w = 1.0 - 2.0 * p;
        (num + (f64::from(y) - p) * w, var + w * w * p * (1.0 - p))
    });
    (var > 0.0).then(|| num / var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when the metric's denominator was zero; the value is then reported as 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

/// Predicts 1 when `score > threshold`; ties at the threshold predict 0.
pub fn confusion_metrics(data: &BinaryLabeledScores, threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for (p, y) in data.iter() {
        match (p > threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| -> (f64, bool) {
        if den == 0 {
            (0.0, true)
        } else {
            (num as f64 / den as f64, false)
        }
    };
    c.accuracy = ratio(c.tp + c.tn, data.len()).0;
    (c.precision, c.precision_undefined) = ratio(c.tp, c.tp + c.fp);
    (c.recall, c.recall_undefined) = ratio(c.tp, c.tp + c.fn_);
    let denom = c.precision + c.recall;
    if denom > 0.0 {
        c.f1 = 2.0 * c.precision * c.recall / denom;
    } else {
        c.f1_undefined = true;
    }
    c
}

/// Mann–Whitney estimate of the ROC area with half credit for ties; `None`
/// for a single-class split.
pub fn auc_roc(data: &BinaryLabeledScores) -> Option<f64> {
    let n_pos = data.positives();
    let n_neg = data.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let s = data.scores();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[i].total_cmp(&s[j]));
    // sum of (1-based, mid-) ranks of the positives
    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && s[order[end]] == s[order[start]] {
            end += 1;
        }
        let mid_rank = (start + end + 1) as f64 / 2.0;
        let positives = order[start..end].iter().filter(|&&i| data.labels()[i] == 1).count();
        pos_rank_sum += mid_rank * positives as f64;
        start = end;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

fn weighted_gap(partition: &BinPartition, data: &BinaryLabeledScores) -> f64 {
    let n = partition.n as f64;
    partition
        .bins
        .iter()
        .map(|b| {
            // gap on the positive-class scale; identical for the complementary class
            let positives = b.members.iter().filter(|&&i| data.labels()[i] == 1).count();
            let obs = positives as f64 / b.size() as f64;
            let first = data.scores()[b.members[0]];
            let mean = first
                + b.members.iter().map(|&i| data.scores()[i] - first).sum::<f64>() / b.size() as f64;
            b.size() as f64 / n * (obs - mean).abs()
        })
        .sum()
}

/// Frequency-based ECE for the positive class on its own MSM partition.
pub fn ece_positive(data: &BinaryLabeledScores) -> Result<f64> {
    let partition = msm_partition(data.scores(), data.labels())?;
    Ok(weighted_gap(&partition, data))
}

/// Frequency-based ECE for the negative class, binned on `1 - s`.
pub fn ece_negative(data: &BinaryLabeledScores) -> Result<f64> {
    let flipped: Vec<f64> = data.scores().iter().map(|s| 1.0 - s).collect();
    let labels: Vec<u8> = data.labels().iter().map(|y| 1 - y).collect();
    let partition = msm_partition(&flipped, &labels)?;
    Ok(weighted_gap(&partition, data))
}

/// `ECE_0 + ECE_1`, each class on its own MSM partition.
pub fn ece(data: &BinaryLabeledScores) -> Result<f64> {
    Ok(ece_negative(data)? + ece_positive(data)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EciSuite {
    pub local: Vec<f64>,
    pub global: f64,
    pub over: Option<f64>,
    pub under: Option<f64>,
    pub balance: Option<f64>,
}

/// Local calibration index of a bin at `(mean_score, obs_freq)`: one minus the
/// distance to the diagonal relative to the largest distance attainable at
/// the same mean score.
pub fn eci_local(mean_score: f64, obs_freq: f64) -> f64 {
    // both distances to the diagonal share the 1/√2 factor, which cancels
    let d = (mean_score - obs_freq).abs();
    let worst = if mean_score <= 0.5 { 1.0 } else { 0.0 };
    let d_max = (mean_score - worst).abs();
    if d_max == 0.0 {
        if d == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - d / d_max
    }
}

pub fn eci_from_partition(partition: &BinPartition) -> EciSuite {
    let n = partition.n as f64;
    let local: Vec<f64> = partition
        .bins
        .iter()
        .map(|b| eci_local(b.mean_score, b.obs_freq))
        .collect();
    let weighted = |select: &dyn Fn(f64, f64) -> bool| -> Option<f64> {
        let (num, den) = partition
            .bins
            .iter()
            .zip(&local)
            .filter(|(b, _)| select(b.mean_score, b.obs_freq))
            .fold((0.0, 0.0), |(num, den), (b, l)| {
                let w = b.size() as f64 / n;
                (num + w * l, den + w)
            });
        (den > 0.0).then(|| num / den)
    };
    let over = weighted(&|score, freq| score > freq);
    let under = weighted(&|score, freq| score <= freq);
    let global = weighted(&|_, _| true).expect("partition has at least one bin");
    let balance = match (over, under) {
        (Some(o), Some(u)) => Some(o - u),
        _ => None,
    };
    EciSuite {
        local,
        global,
        over,
        under,
        balance,
    }
}

/// The ECI suite on the MSM partition of positive-class scores.
pub fn eci_suite(data: &BinaryLabeledScores) -> Result<EciSuite> {
    Ok(eci_from_partition(&msm_partition(data.scores(), data.labels())?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueCalibrationError {
    pub mae: f64,
    pub mse: f64,
}

/// Distance between predicted scores and the known conditional probabilities.
pub fn true_calibration_error(scores: &[f64], truth: &TrueConditionals) -> Result<TrueCalibrationError> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: scores.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::invalid("no scores"));
    }
    let n = scores.len() as f64;
    let (abs, sq) = scores
        .iter()
        .zip(truth.values())
        .fold((0.0, 0.0), |(a, s), (p, q)| (a + (p - q).abs(), s + (p - q).powi(2)));
    Ok(TrueCalibrationError {
        mae: abs / n,
        mse: sq / n,
    })
}

/// Wall-clock and thread CPU seconds per phase of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub train_wall: f64,
    pub train_cpu: f64,
    pub calibrate_wall: f64,
    pub calibrate_cpu: f64,
    pub inference_wall: f64,
    pub inference_cpu: f64,
}

/// Every measure for one test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub brier: f64,
    pub log_loss: f64,
    pub spiegelhalter_z: Option<f64>,
    pub ece: f64,
    pub eci: EciSuite,
    pub auc_roc: Option<f64>,
    pub confusion: Confusion,
    pub true_calibration: Option<TrueCalibrationError>,
    pub timings: PhaseTimings,
}

impl MetricReport {
    pub fn compute(
        data: &BinaryLabeledScores,
        truth: Option<&TrueConditionals>,
        threshold: f64,
        clip_eps: f64,
    ) -> Result<Self> {
        Ok(Self {
            n: data.len(),
            brier: brier(data),
            log_loss: log_loss(data, clip_eps),
            spiegelhalter_z: spiegelhalter_z(data),
            ece: ece(data)?,
            eci: eci_suite(data)?,
            auc_roc: auc_roc(data),
            confusion: confusion_metrics(data, threshold),
            true_calibration: truth.map(|t| true_calibration_error(data.scores(), t)).transpose()?,
            timings: PhaseTimings::default(),
        })
    }
}
