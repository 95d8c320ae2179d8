//! Platt scaling: `p = 1 / (1 + exp(A·s + B))` fitted by maximum likelihood.

use serde::{Deserialize, Serialize};

use super::newton::LogisticProblem;
#[cfg(test)]
use super::newton::sigmoid;
use crate::data::BinaryLabeledScores;
use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
}

impl PlattParams {
    pub fn apply(&self, s: f64) -> f64 {
        1.0 / (1.0 + (self.a * s + self.b).exp())
    }
}

/// Fits `(A, B)` on smoothed targets `(N₊+1)/(N₊+2)` and `1/(N₋+2)`.
///
/// The likelihood is averaged over the calibration set, so the gradient
/// tolerance does not depend on its size.
pub fn fit_platt(cal: &BinaryLabeledScores) -> Result<PlattParams> {
    if !cal.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let n_pos = cal.positives() as f64;
    let n_neg = cal.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);

    let rows: Vec<Vec<f64>> = cal.scores().iter().map(|&s| vec![s, 1.0]).collect();
    let targets: Vec<f64> = cal.labels().iter().map(|&y| if y == 1 { hi } else { lo }).collect();
    let init = vec![0.0, ((n_pos + 1.0) / (n_neg + 1.0)).ln()];
    let out = LogisticProblem {
        rows: &rows,
        targets: &targets,
        ridge: vec![0.0, 0.0],
    }
    .solve(init, MAX_ITER, GRAD_TOL);

    // σ(w_s·s + w_0) = 1 / (1 + exp(-w_s·s - w_0))
    let params = PlattParams {
        a: -out.weights[0],
        b: -out.weights[1],
    };
    if out.converged || out.grad_norm <= 1e-8 {
        Ok(params)
    } else {
        Err(Error::NotConverged {
            iterations: out.iterations,
            grad_norm: out.grad_norm,
            last: vec![params.a, params.b],
        })
    }
}

pub fn apply_platt(params: &PlattParams, s: f64) -> f64 {
    params.apply(s)
}

#[cfg(test)]
pub(crate) fn mean_log_likelihood(params: &PlattParams, cal: &BinaryLabeledScores) -> f64 {
    cal.iter()
        .map(|(s, y)| {
            let z = -(params.a * s + params.b);
            let p = sigmoid(z);
            if y == 1 {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / cal.len() as f64
}
