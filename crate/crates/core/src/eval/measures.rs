//! Rankable measures and their preference direction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LowerBetter,
    HigherBetter,
}

impl Direction {
    /// `a ≺ b`: `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::LowerBetter => a < b,
            Direction::HigherBetter => a > b,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Direction::LowerBetter => "lower",
            Direction::HigherBetter => "higher",
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lower" | "lower_better" => Ok(Direction::LowerBetter),
            "higher" | "higher_better" => Ok(Direction::HigherBetter),
            _ => Err(Error::invalid(format!("unknown direction '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    LogLoss,
    Brier,
    AbsZ,
    Ece,
    EciGlobal,
    AucRoc,
    Accuracy,
    Precision,
    Recall,
    F1,
    TrueMae,
    TrainCpu,
    InferenceCpu,
    TrainWall,
    InferenceWall,
}

impl Measure {
    pub const ALL: [Measure; 15] = [
        Measure::LogLoss,
        Measure::Brier,
        Measure::AbsZ,
        Measure::Ece,
        Measure::EciGlobal,
        Measure::AucRoc,
        Measure::Accuracy,
        Measure::Precision,
        Measure::Recall,
        Measure::F1,
        Measure::TrueMae,
        Measure::TrainCpu,
        Measure::InferenceCpu,
        Measure::TrainWall,
        Measure::InferenceWall,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Measure::LogLoss => "log_loss",
            Measure::Brier => "brier",
            Measure::AbsZ => "abs_z",
            Measure::Ece => "ece",
            Measure::EciGlobal => "eci_global",
            Measure::AucRoc => "auc_roc",
            Measure::Accuracy => "accuracy",
            Measure::Precision => "precision",
            Measure::Recall => "recall",
            Measure::F1 => "f1",
            Measure::TrueMae => "true_mae",
            Measure::TrainCpu => "train_cpu",
            Measure::InferenceCpu => "inference_cpu",
            Measure::TrainWall => "train_wall",
            Measure::InferenceWall => "inference_wall",
        }
    }

    pub fn default_direction(self) -> Direction {
        match self {
            Measure::EciGlobal
            | Measure::AucRoc
            | Measure::Accuracy
            | Measure::Precision
            | Measure::Recall
            | Measure::F1 => Direction::HigherBetter,
            _ => Direction::LowerBetter,
        }
    }

    /// Timing measures vary between runs and are excluded from determinism checks.
    pub fn is_timing(self) -> bool {
        matches!(
            self,
            Measure::TrainCpu | Measure::InferenceCpu | Measure::TrainWall | Measure::InferenceWall
        )
    }

    /// Value of the measure, `None` when undefined for this report.
    pub fn extract(self, r: &MetricReport) -> Option<f64> {
        let t = &r.timings;
        match self {
            Measure::LogLoss => Some(r.log_loss),
            Measure::Brier => Some(r.brier),
            Measure::AbsZ => r.spiegelhalter_z.map(f64::abs),
            Measure::Ece => Some(r.ece),
            Measure::EciGlobal => Some(r.eci.global),
            Measure::AucRoc => r.auc_roc,
            Measure::Accuracy => Some(r.confusion.accuracy),
            Measure::Precision => Some(r.confusion.precision),
            Measure::Recall => Some(r.confusion.recall),
            Measure::F1 => Some(r.confusion.f1),
            Measure::TrueMae => r.true_calibration.map(|e| e.mae),
            Measure::TrainCpu => Some(t.train_cpu + t.calibrate_cpu),
            Measure::InferenceCpu => Some(t.inference_cpu),
            Measure::TrainWall => Some(t.train_wall + t.calibrate_wall),
            Measure::InferenceWall => Some(t.inference_wall),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown measure '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for m in Measure::ALL {
            assert_eq!(m.id().parse::<Measure>().unwrap(), m);
        }
    }

    #[test]
    fn directions() {
        assert_eq!(Measure::LogLoss.default_direction(), Direction::LowerBetter);
        assert_eq!(Measure::AbsZ.default_direction(), Direction::LowerBetter);
        assert_eq!(Measure::EciGlobal.default_direction(), Direction::HigherBetter);
        assert!(Direction::LowerBetter.better(1.0, 2.0));
        assert!(!Direction::LowerBetter.better(2.0, 2.0));
        assert!(Direction::HigherBetter.better(3.0, 2.0));
    }
}
