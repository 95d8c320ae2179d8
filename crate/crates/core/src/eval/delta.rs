use serde::{Deserialize, Serialize};

use crate::data::RunKey;

/// Change of one measure between a calibrated arm and its uncalibrated base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRecord {
    pub measure: String,
    pub key: RunKey,
    pub base: f64,
    pub calibrated: f64,
    pub marginal: f64,
    /// Percentage change; `None` when the base value is zero.
    pub relative_pct: Option<f64>,
}

/// `(marginal, relative %)` for `calibrated` against `base`.
pub fn delta(base: f64, calibrated: f64) -> (f64, Option<f64>) {
    let marginal = calibrated - base;
    let relative = if base == 0.0 {
        None
    } else if marginal == 0.0 {
        Some(0.0)
    } else {
        Some(marginal.signum() * (marginal / base).abs() * 100.0)
    };
    (marginal, relative)
}

impl DeltaRecord {
    pub fn new(measure: impl Into<String>, key: RunKey, base: f64, calibrated: f64) -> Self {
        let (marginal, relative_pct) = delta(base, calibrated);
        Self {
            measure: measure.into(),
            key,
            base,
            calibrated,
            marginal,
            relative_pct,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(delta(2.0, 1.0), (-1.0, Some(-50.0)));
        assert_eq!(delta(2.0, 2.0), (0.0, Some(0.0)));
        assert_eq!(delta(0.0, 1.0), (1.0, None));
    }

    #[test]
    fn negative_base_keeps_marginal_sign() {
        let (m, r) = delta(-2.0, -1.0);
        assert_eq!(m, 1.0);
        assert_eq!(r, Some(50.0));
    }

    proptest! {
        #[test]
        fn relative_sign_follows_marginal(base in -10.0f64..10.0, cal in -10.0f64..10.0) {
            let (m, r) = delta(base, cal);
            if let Some(r) = r {
                prop_assert!(r == 0.0 && m == 0.0 || r.signum() == m.signum());
            }
        }
    }
}
