//! Inductive Venn–Abers predictor.
//!
//! For a query score `s` the calibration set is augmented once with `(s, 0)`
//! and once with `(s, 1)`; the isotonic fit at `s` under each hypothesis gives
//! the pair `(p0, p1)`, merged into `p1 / (1 - p0 + p1)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::isotonic::{merge_ties, pav_blocks, TiedPoint};
use crate::data::BinaryLabeledScores;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct VennAbersModel {
    cal: BinaryLabeledScores,
    points: Vec<TiedPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VennAbersPrediction {
    pub p0: f64,
    pub p1: f64,
    pub point: f64,
}

/// `p1 / (1 - p0 + p1)`, or 0.5 when the denominator vanishes (`p0 = 1, p1 = 0`).
pub fn venn_abers_point(p0: f64, p1: f64) -> f64 {
    let denom = 1.0 - p0 + p1;
    if denom == 0.0 {
        0.5
    } else {
        p1 / denom
    }
}

/// Where a query falls relative to the sorted calibration scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    /// Equal to the calibration point at this index.
    Tie(usize),
    /// Strictly between point `i - 1` and point `i`.
    Gap(usize),
}

pub fn fit_venn_abers(cal: &BinaryLabeledScores) -> Result<VennAbersModel> {
    if !cal.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let points = merge_ties(cal.scores(), |i| f64::from(cal.labels()[i]));
    Ok(VennAbersModel {
        cal: cal.clone(),
        points,
    })
}

impl VennAbersModel {
    /// The calibration split exactly as it was passed to [`fit_venn_abers`].
    pub fn calibration_set(&self) -> &BinaryLabeledScores {
        &self.cal
    }

    fn slot(&self, s: f64) -> Slot {
        let i = self.points.partition_point(|p| p.x < s);
        if i < self.points.len() && self.points[i].x == s {
            Slot::Tie(i)
        } else {
            Slot::Gap(i)
        }
    }

    /// Isotonic value at the query after adding it with `label`.
    fn augmented_value(&self, slot: Slot, label: f64) -> f64 {
        let (augmented, at) = match slot {
            Slot::Tie(i) => {
                let mut pts = self.points.clone();
                pts[i].sum += label;
                pts[i].weight += 1.0;
                (pts, i)
            }
            Slot::Gap(i) => {
                let mut pts = Vec::with_capacity(self.points.len() + 1);
                pts.extend_from_slice(&self.points[..i]);
                // x is irrelevant to PAV once the order is fixed
                pts.push(TiedPoint {
                    x: f64::NAN,
                    sum: label,
                    weight: 1.0,
                });
                pts.extend_from_slice(&self.points[i..]);
                (pts, i)
            }
        };
        let blocks = pav_blocks(&augmented);
        let block = blocks
            .iter()
            .find(|b| b.start <= at && at <= b.end)
            .expect("blocks cover every point");
        block.mean()
    }

    fn predict_slot(&self, slot: Slot) -> VennAbersPrediction {
        let p0 = self.augmented_value(slot, 0.0);
        let p1 = self.augmented_value(slot, 1.0);
        VennAbersPrediction {
            p0,
            p1,
            point: venn_abers_point(p0, p1),
        }
    }

    pub fn predict(&self, s: f64) -> VennAbersPrediction {
        self.predict_slot(self.slot(s))
    }

    /// Same as mapping [`predict`](Self::predict), sharing work between
    /// queries that land in the same calibration slot.
    pub fn predict_many(&self, scores: &[f64]) -> Vec<VennAbersPrediction> {
        let mut cache: HashMap<Slot, VennAbersPrediction> = HashMap::new();
        scores
            .iter()
            .map(|&s| {
                let slot = self.slot(s);
                *cache.entry(slot).or_insert_with(|| self.predict_slot(slot))
            })
            .collect()
    }
}

pub fn apply_venn_abers(model: &VennAbersModel, s: f64) -> VennAbersPrediction {
    model.predict(s)
}
