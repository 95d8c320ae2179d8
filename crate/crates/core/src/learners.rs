//! Small reference classifiers so the harness runs without external models.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibrators::newton::LogisticProblem;
use crate::data::DatasetTable;
use crate::error::{Error, Result};

const L2: f64 = 1e-4;
const MAX_NEWTON_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-10;
const VAR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    ClassPrior,
    Logistic,
    GaussianNb,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 3] = [LearnerKind::ClassPrior, LearnerKind::Logistic, LearnerKind::GaussianNb];

    pub fn id(self) -> &'static str {
        match self {
            LearnerKind::ClassPrior => "class_prior",
            LearnerKind::Logistic => "logistic",
            LearnerKind::GaussianNb => "gaussian_nb",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown learner '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LearnerModel {
    ClassPrior {
        rate: f64,
    },
    /// Weights apply to standardized features: `z = Σ w_j (x_j - mean_j) / scale_j + bias`.
    Logistic {
        weights: Vec<f64>,
        bias: f64,
        mean: Vec<f64>,
        scale: Vec<f64>,
    },
    GaussianNb {
        means: [Vec<f64>; 2],
        variances: [Vec<f64>; 2],
        priors: [f64; 2],
    },
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn require_both_classes(train: &DatasetTable) -> Result<usize> {
    let pos = train.labels().iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == train.len() {
        return Err(Error::SingleClass);
    }
    Ok(pos)
}

/// Fits a learner. Training is deterministic; `seed` is accepted for learners
/// that need randomness and is unused by the three shipped here.
pub fn fit_learner(kind: LearnerKind, train: &DatasetTable, _seed: u64) -> Result<LearnerModel> {
    if train.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    match kind {
        LearnerKind::ClassPrior => {
            let pos = train.labels().iter().filter(|&&y| y == 1).count();
            Ok(LearnerModel::ClassPrior {
                rate: pos as f64 / train.len() as f64,
            })
        }
        LearnerKind::Logistic => {
            require_both_classes(train)?;
            Ok(fit_logistic(train))
        }
        LearnerKind::GaussianNb => {
            require_both_classes(train)?;
            Ok(fit_gnb(train))
        }
    }
}

fn fit_logistic(train: &DatasetTable) -> LearnerModel {
    let n = train.len() as f64;
    let dim = train.dim();
    let mut mean = vec![0.0; dim];
    for row in train.rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x / n;
        }
    }
    let mut scale = vec![0.0; dim];
    for row in train.rows() {
        for ((s, x), m) in scale.iter_mut().zip(row).zip(&mean) {
            *s += (x - m).powi(2) / n;
        }
    }
    for s in &mut scale {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    let rows: Vec<Vec<f64>> = train
        .rows()
        .iter()
        .map(|row| {
            let mut z: Vec<f64> = row.iter().zip(&mean).zip(&scale).map(|((x, m), s)| (x - m) / s).collect();
            z.push(1.0);
            z
        })
        .collect();
    let targets: Vec<f64> = train.labels().iter().map(|&y| f64::from(y)).collect();
    let mut ridge = vec![L2; dim];
    ridge.push(0.0);
    let mut weights = LogisticProblem {
        rows: &rows,
        targets: &targets,
        ridge,
    }
    .solve(vec![0.0; dim + 1], MAX_NEWTON_ITER, NEWTON_TOL)
    .weights;
    let bias = weights.pop().expect("bias coefficient");
    LearnerModel::Logistic {
        weights,
        bias,
        mean,
        scale,
    }
}

fn fit_gnb(train: &DatasetTable) -> LearnerModel {
    let dim = train.dim();
    let mut counts = [0.0f64; 2];
    let mut means = [vec![0.0; dim], vec![0.0; dim]];
    for (row, &y) in train.rows().iter().zip(train.labels()) {
        let c = usize::from(y);
        counts[c] += 1.0;
        for (m, x) in means[c].iter_mut().zip(row) {
            *m += x;
        }
    }
    for c in 0..2 {
        for m in &mut means[c] {
            *m /= counts[c];
        }
    }
    let mut variances = [vec![0.0; dim], vec![0.0; dim]];
    for (row, &y) in train.rows().iter().zip(train.labels()) {
        let c = usize::from(y);
        for ((v, x), m) in variances[c].iter_mut().zip(row).zip(&means[c]) {
            *v += (x - m).powi(2);
        }
    }
    for c in 0..2 {
        for v in &mut variances[c] {
            *v = (*v / counts[c]).max(VAR_FLOOR);
        }
    }
    let n = counts[0] + counts[1];
    LearnerModel::GaussianNb {
        means,
        variances,
        priors: [counts[0] / n, counts[1] / n],
    }
}

impl LearnerModel {
    fn dim(&self) -> Option<usize> {
        match self {
            LearnerModel::ClassPrior { .. } => None,
            LearnerModel::Logistic { weights, .. } => Some(weights.len()),
            LearnerModel::GaussianNb { means, .. } => Some(means[0].len()),
        }
    }

    fn score_row(&self, row: &[f64]) -> f64 {
        match self {
            LearnerModel::ClassPrior { rate } => *rate,
            LearnerModel::Logistic {
                weights,
                bias,
                mean,
                scale,
            } => {
                let z: f64 = row
                    .iter()
                    .zip(weights)
                    .zip(mean.iter().zip(scale))
                    .map(|((x, w), (m, s))| w * (x - m) / s)
                    .sum::<f64>()
                    + bias;
                if z.is_nan() {
                    0.5
                } else {
                    sigmoid(z)
                }
            }
            LearnerModel::GaussianNb {
                means,
                variances,
                priors,
            } => {
                let log_joint = |c: usize| -> f64 {
                    let ll: f64 = row
                        .iter()
                        .zip(&means[c])
                        .zip(&variances[c])
                        .map(|((x, m), v)| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v))
                        .sum();
                    ll + priors[c].ln()
                };
                let diff = log_joint(1) - log_joint(0);
                // both likelihoods underflow to -inf far from the training data
                if diff.is_nan() {
                    priors[1]
                } else {
                    sigmoid(diff)
                }
            }
        }
    }
}

pub fn predict_scores(model: &LearnerModel, rows: &DatasetTable) -> Result<Vec<f64>> {
    if let Some(dim) = model.dim() {
        if !rows.is_empty() && rows.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: rows.dim(),
            });
        }
    }
    Ok(rows.rows().iter().map(|r| model.score_row(r)).collect())
}
