//! Split-conformal bands on the Pearson-residual scale.
//!
//! The nonconformity score of a calibration instance is `|y - p| / sqrt(p(1-p))`.
//! Its finite-sample `⌈(n+1)(1-α)⌉`-th order statistic `q` defines the band
//! `s ± q·sqrt(s(1-s))`, clamped to `[0, 1]`; the point estimate is the band
//! midpoint.

use serde::{Deserialize, Serialize};

use crate::data::{clip, BinaryLabeledScores, FEATURE_CLIP};
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonifyModel {
    pub q_alpha: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonifyInterval {
    pub lo: f64,
    pub hi: f64,
    pub point: f64,
}

pub fn pearson_residual(p: f64, y: u8) -> f64 {
    let p = clip(p, FEATURE_CLIP);
    (f64::from(y) - p).abs() / (p * (1.0 - p)).sqrt()
}

pub fn fit_pearsonify(cal: &BinaryLabeledScores, alpha: f64) -> Result<PearsonifyModel> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} must lie in (0, 1)")));
    }
    let n = cal.len();
    if n == 0 {
        return Err(Error::invalid("empty calibration set"));
    }
    let mut residuals: Vec<f64> = cal.iter().map(|(p, y)| pearson_residual(p, y)).collect();
    residuals.sort_by(f64::total_cmp);
    // 1-based rank; above n the finite-sample quantile is unbounded, so use the maximum
    let rank = (((n + 1) as f64) * (1.0 - alpha)).ceil() as usize;
    let q_alpha = residuals[rank.clamp(1, n) - 1];
    Ok(PearsonifyModel { q_alpha, alpha })
}

impl PearsonifyModel {
    pub fn apply(&self, s: f64) -> PearsonifyInterval {
        let half = self.q_alpha * (s * (1.0 - s)).max(0.0).sqrt();
        let lo = (s - half).max(0.0);
        let hi = (s + half).min(1.0);
        PearsonifyInterval {
            lo,
            hi,
            point: 0.5 * (lo + hi),
        }
    }
}

pub fn apply_pearsonify(model: &PearsonifyModel, s: f64) -> PearsonifyInterval {
    model.apply(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_predictions_give_tiny_quantile() {
        let cal = BinaryLabeledScores::new(vec![0.0, 1.0, 1.0, 0.0], vec![0, 1, 1, 0]).unwrap();
        let m = fit_pearsonify(&cal, 0.1).unwrap();
        assert!(m.q_alpha > 0.0 && m.q_alpha < 2e-3, "{}", m.q_alpha);
    }

    #[test]
    fn identical_residuals() {
        let cal = BinaryLabeledScores::new(vec![0.5; 99], vec![1; 99]).unwrap();
        let m = fit_pearsonify(&cal, 0.1).unwrap();
        assert_eq!(m.q_alpha, 1.0);
    }

    #[test]
    fn quantile_grows_as_alpha_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (s, y): (Vec<f64>, Vec<u8>) = (0..300)
            .map(|_| {
                let p: f64 = rng.random_range(0.05..0.95);
                (p, rng.random_bool(p) as u8)
            })
            .unzip();
        let cal = BinaryLabeledScores::new(s, y).unwrap();
        let mut prev = 0.0;
        for alpha in [0.9, 0.5, 0.3, 0.2, 0.1, 0.05, 0.01, 0.001] {
            let q = fit_pearsonify(&cal, alpha).unwrap().q_alpha;
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn apply_examples() {
        let z = PearsonifyModel { q_alpha: 0.0, alpha: 0.1 }.apply(0.7);
        assert_eq!((z.lo, z.hi, z.point), (0.7, 0.7, 0.7));
        let one = PearsonifyModel { q_alpha: 1.0, alpha: 0.1 }.apply(0.5);
        assert_eq!((one.lo, one.hi, one.point), (0.0, 1.0, 0.5));
        let two = PearsonifyModel { q_alpha: 2.0, alpha: 0.1 }.apply(0.9);
        assert!((two.lo - 0.3).abs() < 1e-12);
        assert_eq!(two.hi, 1.0);
        assert!((two.point - 0.65).abs() < 1e-12);
    }

    #[test]
    fn invalid_alpha_is_rejected() {
        let cal = BinaryLabeledScores::new(vec![0.5], vec![1]).unwrap();
        assert!(fit_pearsonify(&cal, 0.0).is_err());
        assert!(fit_pearsonify(&cal, 1.0).is_err());
    }

    #[test]
    fn marginal_coverage_on_exchangeable_data() {
        let alpha = 0.1;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut draw = |n: usize| -> (Vec<f64>, Vec<u8>) {
            (0..n)
                .map(|_| {
                    let p: f64 = rng.random_range(0.02..0.98);
                    (p, rng.random_bool(p) as u8)
                })
                .unzip()
        };
        for _ in 0..20 {
            let (s, y) = draw(1000);
            let m = fit_pearsonify(&BinaryLabeledScores::new(s, y).unwrap(), alpha).unwrap();
            let (ts, ty) = draw(1000);
            let covered = ts
                .iter()
                .zip(&ty)
                .filter(|(&p, &y)| pearson_residual(p, y) <= m.q_alpha)
                .count();
            assert!(covered as f64 / 1000.0 >= 1.0 - alpha - 0.03, "{covered}");
        }
    }
}
