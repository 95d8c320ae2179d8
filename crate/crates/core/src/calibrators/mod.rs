//! Post-hoc calibration maps fitted on a held-out calibration split.

pub mod beta;
pub mod isotonic;
pub(crate) mod newton;
pub mod pearsonify;
pub mod platt;
pub mod venn_abers;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use beta::{apply_beta, fit_beta, BetaParams};
pub use isotonic::{apply_isotonic, fit_isotonic, isotonic_fitted_values, IsotonicModel};
pub use pearsonify::{apply_pearsonify, DEFAULT_ALPHA, fit_pearsonify, PearsonifyInterval, PearsonifyModel};
pub use platt::{apply_platt, fit_platt, PlattParams};
pub use venn_abers::{apply_venn_abers, fit_venn_abers, venn_abers_point, VennAbersModel, VennAbersPrediction};

use crate::data::BinaryLabeledScores;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibratorKind {
    Platt,
    Isotonic,
    Beta,
    VennAbers,
    Pearsonify,
}

impl CalibratorKind {
    pub const ALL: [CalibratorKind; 5] = [
        CalibratorKind::Platt,
        CalibratorKind::Isotonic,
        CalibratorKind::Beta,
        CalibratorKind::VennAbers,
        CalibratorKind::Pearsonify,
    ];

    pub fn id(self) -> &'static str {
        match self {
            CalibratorKind::Platt => "platt",
            CalibratorKind::Isotonic => "isotonic",
            CalibratorKind::Beta => "beta",
            CalibratorKind::VennAbers => "venn_abers",
            CalibratorKind::Pearsonify => "pearsonify",
        }
    }
}

impl fmt::Display for CalibratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for CalibratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CalibratorKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown calibrator '{s}'")))
    }
}

/// A fitted calibration map of any kind.
#[derive(Debug, Clone)]
pub enum CalibratorModel {
    Platt(PlattParams),
    Isotonic(IsotonicModel),
    Beta(BetaParams),
    VennAbers(VennAbersModel),
    Pearsonify(PearsonifyModel),
}

pub fn fit_calibrator(kind: CalibratorKind, cal: &BinaryLabeledScores, alpha: f64) -> Result<CalibratorModel> {
    Ok(match kind {
        CalibratorKind::Platt => CalibratorModel::Platt(fit_platt(cal)?),
        CalibratorKind::Isotonic => CalibratorModel::Isotonic(fit_isotonic(cal)),
        CalibratorKind::Beta => CalibratorModel::Beta(fit_beta(cal)?),
        CalibratorKind::VennAbers => CalibratorModel::VennAbers(fit_venn_abers(cal)?),
        CalibratorKind::Pearsonify => CalibratorModel::Pearsonify(fit_pearsonify(cal, alpha)?),
    })
}

impl CalibratorModel {
    pub fn kind(&self) -> CalibratorKind {
        match self {
            CalibratorModel::Platt(_) => CalibratorKind::Platt,
            CalibratorModel::Isotonic(_) => CalibratorKind::Isotonic,
            CalibratorModel::Beta(_) => CalibratorKind::Beta,
            CalibratorModel::VennAbers(_) => CalibratorKind::VennAbers,
            CalibratorModel::Pearsonify(_) => CalibratorKind::Pearsonify,
        }
    }

    /// Calibrated positive-class probability.
    pub fn apply(&self, s: f64) -> f64 {
        match self {
            CalibratorModel::Platt(p) => p.apply(s),
            CalibratorModel::Isotonic(m) => m.apply(s),
            CalibratorModel::Beta(p) => p.apply(s),
            CalibratorModel::VennAbers(m) => m.predict(s).point,
            CalibratorModel::Pearsonify(m) => m.apply(s).point,
        }
    }

    pub fn apply_many(&self, scores: &[f64]) -> Vec<f64> {
        match self {
            CalibratorModel::VennAbers(m) => m.predict_many(scores).into_iter().map(|p| p.point).collect(),
            _ => scores.iter().map(|&s| self.apply(s)).collect(),
        }
    }
}
