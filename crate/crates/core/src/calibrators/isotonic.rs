//! Isotonic regression by pool-adjacent-violators.

use serde::{Deserialize, Serialize};

use crate::data::BinaryLabeledScores;
use crate::error::{Error, Result};

/// A distinct score with the label sum and count of the instances that share it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TiedPoint {
    pub x: f64,
    pub sum: f64,
    pub weight: f64,
}

/// Sorts by score and merges equal scores into weighted points.
pub(crate) fn merge_ties(scores: &[f64], targets: impl Fn(usize) -> f64) -> Vec<TiedPoint> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(i.cmp(&j)));
    let mut out: Vec<TiedPoint> = Vec::with_capacity(scores.len());
    for i in order {
        match out.last_mut() {
            Some(last) if last.x == scores[i] => {
                last.sum += targets(i);
                last.weight += 1.0;
            }
            _ => out.push(TiedPoint {
                x: scores[i],
                sum: targets(i),
                weight: 1.0,
            }),
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Block {
    pub start: usize,
    pub end: usize,
    pub sum: f64,
    pub weight: f64,
}

impl Block {
    pub fn mean(&self) -> f64 {
        self.sum / self.weight
    }
}

/// Weighted PAV over points already in ascending `x` order. Blocks cover
/// `start..=end` point indices.
pub(crate) fn pav_blocks(points: &[TiedPoint]) -> Vec<Block> {
    let mut blocks: Vec<Block> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        blocks.push(Block {
            start: i,
            end: i,
            sum: p.sum,
            weight: p.weight,
        });
        while blocks.len() >= 2 {
            let n = blocks.len();
            if blocks[n - 2].mean() > blocks[n - 1].mean() {
                let last = blocks.pop().expect("len >= 2");
                let prev = blocks.last_mut().expect("len >= 1");
                prev.end = last.end;
                prev.sum += last.sum;
                prev.weight += last.weight;
            } else {
                break;
            }
        }
    }
    blocks
}

/// Piecewise-linear monotone map through the fitted block end points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicModel {
    boundaries: Vec<f64>,
    values: Vec<f64>,
}

impl IsotonicModel {
    pub fn from_parts(boundaries: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if boundaries.is_empty() {
            return Err(Error::invalid("isotonic model needs at least one knot"));
        }
        if boundaries.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: boundaries.len(),
                got: values.len(),
            });
        }
        if boundaries.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::invalid("isotonic boundaries must be strictly increasing"));
        }
        if values.windows(2).any(|w| w[0] > w[1]) || values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("isotonic values must be non-decreasing in [0, 1]"));
        }
        Ok(Self { boundaries, values })
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn apply(&self, s: f64) -> f64 {
        let b = &self.boundaries;
        let v = &self.values;
        let last = b.len() - 1;
        if s <= b[0] {
            return v[0];
        }
        if s >= b[last] {
            return v[last];
        }
        // first knot strictly greater than s; 1 ≤ hi ≤ last here
        let hi = b.partition_point(|&k| k <= s);
        let lo = hi - 1;
        let t = (s - b[lo]) / (b[hi] - b[lo]);
        v[lo] + t * (v[hi] - v[lo])
    }
}

/// Least-squares monotone fit; ties in score are pooled before PAV.
pub fn fit_isotonic(cal: &BinaryLabeledScores) -> IsotonicModel {
    let points = merge_ties(cal.scores(), |i| f64::from(cal.labels()[i]));
    let blocks = pav_blocks(&points);
    let mut boundaries = Vec::with_capacity(2 * blocks.len());
    let mut values = Vec::with_capacity(2 * blocks.len());
    for block in &blocks {
        let m = block.mean();
        boundaries.push(points[block.start].x);
        values.push(m);
        if block.end != block.start {
            boundaries.push(points[block.end].x);
            values.push(m);
        }
    }
    IsotonicModel { boundaries, values }
}

pub fn apply_isotonic(model: &IsotonicModel, s: f64) -> f64 {
    model.apply(s)
}

/// PAV fitted value of every calibration instance, in input order.
pub fn isotonic_fitted_values(cal: &BinaryLabeledScores) -> Vec<f64> {
    let model = fit_isotonic(cal);
    // every calibration score is a knot or lies inside a constant block
    cal.scores().iter().map(|&s| model.apply(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cal(s: &[f64], y: &[u8]) -> BinaryLabeledScores {
        BinaryLabeledScores::new(s.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn pools_one_violation() {
        let c = cal(&[0.1, 0.2, 0.3, 0.4], &[0, 1, 0, 1]);
        assert_eq!(isotonic_fitted_values(&c), vec![0.0, 0.5, 0.5, 1.0]);
    }

    #[test]
    fn monotone_labels_are_reproduced() {
        let c = cal(&[0.4, 0.1, 0.3, 0.2], &[1, 0, 1, 0]);
        assert_eq!(isotonic_fitted_values(&c), vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn single_class_gives_constant() {
        let c = cal(&[0.3, 0.1, 0.9], &[1, 1, 1]);
        let m = fit_isotonic(&c);
        for s in [0.0, 0.2, 0.5, 1.0] {
            assert_eq!(m.apply(s), 1.0);
        }
    }

    #[test]
    fn ties_are_pooled_order_independently() {
        let a = fit_isotonic(&cal(&[0.5, 0.5, 0.2], &[1, 0, 0]));
        let b = fit_isotonic(&cal(&[0.2, 0.5, 0.5], &[0, 0, 1]));
        assert_eq!(a, b);
        assert_eq!(a.apply(0.5), 0.5);
    }

    #[test]
    fn apply_examples() {
        let m = IsotonicModel::from_parts(vec![0.2, 0.8], vec![0.1, 0.9]).unwrap();
        assert_eq!(m.apply(0.2), 0.1);
        assert!((m.apply(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(m.apply(0.05), 0.1);
        assert_eq!(m.apply(0.95), 0.9);
    }

    #[test]
    fn empty_model_is_rejected() {
        assert!(IsotonicModel::from_parts(vec![], vec![]).is_err());
        assert!(IsotonicModel::from_parts(vec![0.5, 0.4], vec![0.1, 0.2]).is_err());
    }

    proptest! {
        #[test]
        fn apply_is_monotone_and_bounded(
            pts in proptest::collection::vec((0.0f64..=1.0, 0u8..=1), 1..60),
            grid in proptest::collection::vec(0.0f64..=1.0, 2..30),
        ) {
            let (s, y): (Vec<f64>, Vec<u8>) = pts.into_iter().unzip();
            let m = fit_isotonic(&cal(&s, &y));
            let mut g = grid;
            g.sort_by(f64::total_cmp);
            let vals: Vec<f64> = g.iter().map(|&x| m.apply(x)).collect();
            for w in vals.windows(2) {
                prop_assert!(w[0] <= w[1] + 1e-15);
            }
            prop_assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
