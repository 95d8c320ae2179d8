//! Domain types shared across the crate, score validation and seed derivation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Clip margin used when scores enter a logarithm during log-loss evaluation.
pub const LOG_LOSS_CLIP: f64 = 1e-15;

/// Clip margin for calibrators that take `ln(s)` / `ln(1 - s)` of their inputs.
pub const FEATURE_CLIP: f64 = 1e-6;

/// Positive-class scores paired with binary labels for a single split.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryLabeledScores {
    scores: Vec<f64>,
    labels: Vec<u8>,
}

impl BinaryLabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::invalid("at least one instance is required"));
        }
        if scores.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: scores.len(),
                got: labels.len(),
            });
        }
        for (index, &value) in scores.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::invalid(format!(
                    "score {value} at index {index} is outside [0, 1]"
                )));
            }
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::invalid(format!(
                "label {} at index {i} is not 0 or 1",
                labels[i]
            )));
        }
        Ok(Self { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.positives();
        pos > 0 && pos < self.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, u8)> + '_ {
        self.scores.iter().copied().zip(self.labels.iter().copied())
    }

    /// Same labels, different scores.
    pub fn with_scores(&self, scores: Vec<f64>) -> Result<Self> {
        Self::new(scores, self.labels.clone())
    }
}

/// Feature rows with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    pub dataset_id: String,
    rows: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl DatasetTable {
    pub fn new(dataset_id: impl Into<String>, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        if let Some(first) = rows.first() {
            let dim = first.len();
            if dim == 0 {
                return Err(Error::invalid("rows must have at least one feature"));
            }
            if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: bad.len(),
                });
            }
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
        Ok(Self {
            dataset_id: dataset_id.into(),
            rows,
            labels,
        })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Rows and labels at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            dataset_id: self.dataset_id.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// True `P(Y = 1 | X = x_i)` for every row of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueConditionals {
    q: Vec<f64>,
}

impl TrueConditionals {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if let Some(i) = q.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!(
                "true conditional {} at index {i} is outside [0, 1]",
                q[i]
            )));
        }
        Ok(Self { q })
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            q: indices.iter().map(|&i| self.q[i]).collect(),
        }
    }
}

/// Identifies one (learner, calibrator, dataset, fold) cell of a benchmark grid.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunKey {
    pub learner_id: String,
    pub calibrator_id: String,
    pub dataset_id: String,
    pub fold: usize,
}

impl RunKey {
    pub fn new(
        learner_id: impl Into<String>,
        calibrator_id: impl Into<String>,
        dataset_id: impl Into<String>,
        fold: usize,
    ) -> Self {
        Self {
            learner_id: learner_id.into(),
            calibrator_id: calibrator_id.into(),
            dataset_id: dataset_id.into(),
            fold,
        }
    }

    pub fn canonical(&self) -> String {
        format!(
            "learner={};calibrator={};dataset={};fold={}",
            self.learner_id, self.calibrator_id, self.dataset_id, self.fold
        )
    }
}

#[inline]
pub fn clip(s: f64, eps: f64) -> f64 {
    s.clamp(eps, 1.0 - eps)
}

/// Clamps each score into `[clip_eps, 1 - clip_eps]`, rejecting non-finite values.
pub fn validate_scores(raw: &[f64], clip_eps: f64) -> Result<Vec<f64>> {
    if !(clip_eps > 0.0 && clip_eps < 0.5) {
        return Err(Error::invalid(format!("clip_eps {clip_eps} must lie in (0, 0.5)")));
    }
    raw.iter()
        .enumerate()
        .map(|(index, &value)| {
            if value.is_finite() {
                Ok(clip(value, clip_eps))
            } else {
                Err(Error::NonFinite { index, value })
            }
        })
        .collect()
}

/// Mixes a master seed with an ordered list of string parts.
///
/// The parts are joined with an unambiguous separator and hashed with SHA-256
/// together with the little-endian seed, so the result is identical on every
/// platform.
pub fn derive_seed(master_seed: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn derive_task_seed(master_seed: u64, key: &RunKey) -> u64 {
    derive_seed(master_seed, &[&key.canonical()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interior_point_unchanged() {
        assert_eq!(validate_scores(&[0.5], 1e-15).unwrap(), vec![0.5]);
    }

    #[test]
    fn boundaries_are_clamped() {
        let v = validate_scores(&[0.0, 1.0], 1e-15).unwrap();
        assert_eq!(v, vec![1e-15, 1.0 - 1e-15]);
    }

    #[test]
    fn nan_is_rejected_with_index() {
        match validate_scores(&[0.2, f64::NAN], 1e-15) {
            Err(Error::NonFinite { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            validate_scores(&[f64::NAN], 1e-15),
            Err(Error::NonFinite { index: 0, .. })
        ));
    }

    #[test]
    fn bad_clip_eps_is_rejected() {
        assert!(validate_scores(&[0.5], 0.0).is_err());
        assert!(validate_scores(&[0.5], 0.5).is_err());
    }

    #[test]
    fn seeds_are_deterministic_and_sensitive() {
        let k1 = RunKey::new("logistic", "beta", "twonorm", 1);
        let k2 = RunKey::new("logistic", "beta", "twonorm", 2);
        assert_eq!(derive_task_seed(7, &k1), derive_task_seed(7, &k1));
        assert_ne!(derive_task_seed(7, &k1), derive_task_seed(7, &k2));
        assert_ne!(derive_task_seed(7, &k1), derive_task_seed(8, &k1));
        // field boundaries matter
        assert_ne!(derive_seed(1, &["ab", "c"]), derive_seed(1, &["a", "bc"]));
    }

    #[test]
    fn seeds_distinct_across_a_grid() {
        let mut seen = std::collections::HashSet::new();
        for l in ["class_prior", "logistic", "gaussian_nb"] {
            for c in ["none", "platt", "isotonic", "beta", "venn_abers", "pearsonify"] {
                for f in 1..=5 {
                    assert!(seen.insert(derive_task_seed(7, &RunKey::new(l, c, "d", f))));
                }
            }
        }
    }

    #[test]
    fn scores_constructor_checks_invariants() {
        assert!(BinaryLabeledScores::new(vec![], vec![]).is_err());
        assert!(BinaryLabeledScores::new(vec![0.5], vec![1, 0]).is_err());
        assert!(BinaryLabeledScores::new(vec![1.5], vec![1]).is_err());
        assert!(BinaryLabeledScores::new(vec![0.5], vec![2]).is_err());
        let d = BinaryLabeledScores::new(vec![0.2, 0.9], vec![0, 1]).unwrap();
        assert!(d.has_both_classes());
    }

    #[test]
    fn table_rejects_ragged_rows() {
        assert!(DatasetTable::new("t", vec![vec![1.0], vec![1.0, 2.0]], vec![0, 1]).is_err());
    }

    proptest! {
        #[test]
        fn validate_is_idempotent(raw in proptest::collection::vec(-1.0f64..2.0, 0..40)) {
            let once = validate_scores(&raw, 1e-6).unwrap();
            let twice = validate_scores(&once, 1e-6).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn validate_is_monotone(a in -1.0f64..2.0, b in -1.0f64..2.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let v = validate_scores(&[lo, hi], 1e-15).unwrap();
            prop_assert!(v[0] <= v[1]);
        }
    }
}
