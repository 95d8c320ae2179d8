//! Beta calibration: `μ(s) = 1 / (1 + e^{-c} (1-s)^b / s^a)` with `a, b ≥ 0`.
//!
//! Equivalent to a logistic regression of the labels on `ln s` and
//! `-ln(1 - s)`; a negative coefficient is pinned to zero and the remaining
//! parameters refitted.

use serde::{Deserialize, Serialize};

use super::newton::{sigmoid, LogisticProblem};
use crate::data::{clip, BinaryLabeledScores, FEATURE_CLIP};
use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-10;
// Keeps coefficients finite on separable calibration sets.
const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl BetaParams {
    pub fn apply(&self, s: f64) -> f64 {
        let s = clip(s, FEATURE_CLIP);
        sigmoid(self.a * s.ln() - self.b * (1.0 - s).ln() + self.c)
    }
}

#[derive(Clone, Copy)]
enum Free {
    Both,
    OnlyB,
    OnlyA,
    Neither,
}

fn fit_with(features: &[(f64, f64)], targets: &[f64], free: Free) -> BetaParams {
    let rows: Vec<Vec<f64>> = features
        .iter()
        .map(|&(la, lb)| match free {
            Free::Both => vec![la, lb, 1.0],
            Free::OnlyB => vec![lb, 1.0],
            Free::OnlyA => vec![la, 1.0],
            Free::Neither => vec![1.0],
        })
        .collect();
    let k = rows[0].len();
    let mut ridge = vec![RIDGE; k];
    ridge[k - 1] = 0.0;
    let mut init = vec![1.0; k];
    init[k - 1] = 0.0;
    let w = LogisticProblem {
        rows: &rows,
        targets,
        ridge,
    }
    .solve(init, MAX_ITER, GRAD_TOL)
    .weights;
    match free {
        Free::Both => BetaParams { a: w[0], b: w[1], c: w[2] },
        Free::OnlyB => BetaParams { a: 0.0, b: w[0], c: w[1] },
        Free::OnlyA => BetaParams { a: w[0], b: 0.0, c: w[1] },
        Free::Neither => BetaParams { a: 0.0, b: 0.0, c: w[0] },
    }
}

pub fn fit_beta(cal: &BinaryLabeledScores) -> Result<BetaParams> {
    if !cal.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let features: Vec<(f64, f64)> = cal
        .scores()
        .iter()
        .map(|&s| {
            let s = clip(s, FEATURE_CLIP);
            (s.ln(), -(1.0 - s).ln())
        })
        .collect();
    let targets: Vec<f64> = cal.labels().iter().map(|&y| f64::from(y)).collect();

    let full = fit_with(&features, &targets, Free::Both);
    let params = if full.a < 0.0 {
        let p = fit_with(&features, &targets, Free::OnlyB);
        if p.b < 0.0 {
            fit_with(&features, &targets, Free::Neither)
        } else {
            p
        }
    } else if full.b < 0.0 {
        let p = fit_with(&features, &targets, Free::OnlyA);
        if p.a < 0.0 {
            fit_with(&features, &targets, Free::Neither)
        } else {
            p
        }
    } else {
        full
    };
    Ok(params)
}

pub fn apply_beta(params: &BetaParams, s: f64) -> f64 {
    params.apply(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn log_loss(f: impl Fn(f64) -> f64, cal: &BinaryLabeledScores) -> f64 {
        cal.iter()
            .map(|(s, y)| {
                let p = clip(f(s), 1e-15);
                if y == 1 {
                    -p.ln()
                } else {
                    -(1.0 - p).ln()
                }
            })
            .sum::<f64>()
            / cal.len() as f64
    }

    #[test]
    fn apply_examples() {
        let id = BetaParams { a: 1.0, b: 1.0, c: 0.0 };
        assert!((id.apply(0.3) - 0.3).abs() < 1e-15);
        let flat = BetaParams { a: 0.0, b: 0.0, c: 0.0 };
        for s in [0.0, 0.1, 0.77, 1.0] {
            assert_eq!(flat.apply(s), 0.5);
        }
        assert!((BetaParams { a: 2.0, b: 2.0, c: 0.0 }.apply(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn calibrated_source_is_not_worse_than_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (s, y): (Vec<f64>, Vec<u8>) = (0..5000)
            .map(|_| {
                let s: f64 = rng.random_range(0.01..0.99);
                (s, rng.random_bool(s) as u8)
            })
            .unzip();
        let cal = BinaryLabeledScores::new(s, y).unwrap();
        let p = fit_beta(&cal).unwrap();
        assert!(log_loss(|s| p.apply(s), &cal) <= log_loss(|s| s, &cal) + 1e-3);
        assert!((p.a - 1.0).abs() < 0.2 && (p.b - 1.0).abs() < 0.2, "{p:?}");
    }

    #[test]
    fn mirror_symmetric_data_gives_equal_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut s = Vec::new();
        let mut y = Vec::new();
        for _ in 0..3000 {
            let v: f64 = rng.random_range(0.02..0.98);
            let l = rng.random_bool(v * v) as u8;
            s.push(v);
            y.push(l);
            s.push(1.0 - v);
            y.push(1 - l);
        }
        let p = fit_beta(&BinaryLabeledScores::new(s, y).unwrap()).unwrap();
        assert!((p.a - p.b).abs() < 0.05, "{p:?}");
        assert!(p.c.abs() < 0.05, "{p:?}");
    }

    #[test]
    fn uninformative_scores_give_near_constant_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (s, y): (Vec<f64>, Vec<u8>) = (0..20000)
            .map(|_| (rng.random_range(0.01..0.99), rng.random_bool(0.3) as u8))
            .unzip();
        let cal = BinaryLabeledScores::new(s, y).unwrap();
        let p = fit_beta(&cal).unwrap();
        assert!(p.a >= 0.0 && p.b >= 0.0);
        // the fitted map stays near the base rate across the score range
        let rate = cal.positives() as f64 / cal.len() as f64;
        for s in [0.05, 0.25, 0.5, 0.75, 0.95] {
            assert!((p.apply(s) - rate).abs() < 0.03, "{s}: {}", p.apply(s));
        }
        // brute-force grid over constants: the fit is at least as good as the best constant
        let best_const = (1..1000)
            .map(|i| log_loss(|_| i as f64 / 1000.0, &cal))
            .fold(f64::INFINITY, f64::min);
        assert!(log_loss(|s| p.apply(s), &cal) <= best_const + 1e-6);
    }

    #[test]
    fn negative_coefficient_is_pinned() {
        // decreasing relation at the low end pushes a below zero
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (s, y): (Vec<f64>, Vec<u8>) = (0..4000)
            .map(|_| {
                let s: f64 = rng.random_range(0.001..0.999);
                (s, rng.random_bool(1.0 - s) as u8)
            })
            .unzip();
        let p = fit_beta(&BinaryLabeledScores::new(s, y).unwrap()).unwrap();
        assert!(p.a >= 0.0 && p.b >= 0.0, "{p:?}");
    }

    #[test]
    fn single_class_is_rejected() {
        let cal = BinaryLabeledScores::new(vec![0.2, 0.4], vec![0, 0]).unwrap();
        assert!(matches!(fit_beta(&cal), Err(Error::SingleClass)));
    }
}
