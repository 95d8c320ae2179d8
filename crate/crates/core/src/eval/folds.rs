use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Fold id (1-based) of every instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

fn class_members(labels: &[u8], indices: impl Iterator<Item = usize>) -> [Vec<usize>; 2] {
    let mut members = [Vec::new(), Vec::new()];
    for i in indices {
        members[usize::from(labels[i])].push(i);
    }
    members
}

/// Shuffles each class with a seeded RNG and deals it round-robin into `k`
/// folds, continuing the deal where the previous class stopped.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64, allow_degenerate: bool) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    let mut members = class_members(labels, 0..labels.len());
    if !allow_degenerate {
        for (class, m) in members.iter().enumerate() {
            if m.len() < k {
                return Err(Error::invalid(format!(
                    "class {class} has {} members, fewer than k = {k}",
                    m.len()
                )));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    let mut next = 0;
    for m in &mut members {
        m.shuffle(&mut rng);
        for &i in m.iter() {
            fold_of[i] = next % k + 1;
            next += 1;
        }
    }
    Ok(FoldAssignment { fold_of, k })
}

/// Splits training indices into `(fit, calibration)` with stratification by class.
///
/// Each class contributes `round(fraction · class_size)` calibration instances.
pub fn holdout_calibration_split(
    train_indices: &[usize],
    labels: &[u8],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("calibration fraction {fraction} must lie in (0, 1)")));
    }
    let mut members = class_members(labels, train_indices.iter().copied());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fit = Vec::new();
    let mut cal = Vec::new();
    for (class, m) in members.iter_mut().enumerate() {
        let take = (fraction * m.len() as f64).round() as usize;
        if take == 0 || take == m.len() {
            return Err(Error::invalid(format!(
                "class {class} ({} training instances) cannot be split with fraction {fraction}",
                m.len()
            )));
        }
        m.shuffle(&mut rng);
        cal.extend_from_slice(&m[..take]);
        fit.extend_from_slice(&m[take..]);
    }
    fit.sort_unstable();
    cal.sort_unstable();
    Ok((fit, cal))
}
