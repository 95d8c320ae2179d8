//! Equal-mass score binning with a monotonic sweep over the bin count.
//!
//! Instances are ordered by score. For each candidate count `b`, starting at
//! `⌈√N⌉` and moving down to 2, the ordered instances are cut into `b`
//! quantile bins; the first `b` whose observed frequencies are non-decreasing
//! is kept, otherwise `b = 2`. Instances with equal scores are never split
//! across bins: a tie group joins the bin its first member falls into, so a
//! bin may absorb a whole tie group and some candidate bins may vanish.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Bin {
    /// Input indices in ascending (score, label, index) order.
    pub members: Vec<usize>,
    /// Mean score of the members.
    pub mean_score: f64,
    /// Fraction of members with label 1.
    pub obs_freq: f64,
    pub positives: usize,
}

impl Bin {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinPartition {
    pub bins: Vec<Bin>,
    /// Bin count requested by the sweep (non-empty bins may be fewer on ties).
    pub requested: usize,
    pub n: usize,
}

/// Mean that is exact when all values are equal.
fn shifted_mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = values.clone();
    let Some(first) = it.next() else { return f64::NAN };
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + (v - first), c + 1));
    first + sum / count as f64
}

/// Groups of equal scores as `(start, end)` ranges into `order`.
fn tie_groups(order: &[usize], scores: &[f64]) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut start = 0;
    for pos in 1..=order.len() {
        if pos == order.len() || scores[order[pos]] != scores[order[start]] {
            groups.push((start, pos));
            start = pos;
        }
    }
    groups
}

fn partition_with(order: &[usize], groups: &[(usize, usize)], scores: &[f64], labels: &[u8], b: usize) -> Vec<Bin> {
    let n = order.len();
    let mut bins: Vec<Bin> = Vec::with_capacity(b);
    let mut current: Option<usize> = None;
    for &(start, end) in groups {
        let id = start * b / n;
        if current != Some(id) {
            bins.push(Bin {
                members: Vec::new(),
                mean_score: 0.0,
                obs_freq: 0.0,
                positives: 0,
            });
            current = Some(id);
        }
        bins.last_mut().expect("pushed").members.extend_from_slice(&order[start..end]);
    }
    for bin in &mut bins {
        bin.positives = bin.members.iter().filter(|&&i| labels[i] == 1).count();
        bin.obs_freq = bin.positives as f64 / bin.members.len() as f64;
        bin.mean_score = shifted_mean(bin.members.iter().map(|&i| scores[i]));
    }
    bins
}

fn is_monotone(bins: &[Bin]) -> bool {
    bins.windows(2).all(|w| w[0].obs_freq <= w[1].obs_freq)
}

pub fn msm_partition(scores: &[f64], labels: &[u8]) -> Result<BinPartition> {
    let n = scores.len();
    if n < 2 {
        return Err(Error::invalid(format!("binning needs at least 2 instances, got {n}")));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        scores[i]
            .total_cmp(&scores[j])
            .then(labels[i].cmp(&labels[j]))
            .then(i.cmp(&j))
    });
    let groups = tie_groups(&order, scores);
    let max_b = ((n as f64).sqrt().ceil() as usize).max(2);
    for b in (2..=max_b).rev() {
        let bins = partition_with(&order, &groups, scores, labels, b);
        if is_monotone(&bins) {
            return Ok(BinPartition { bins, requested: b, n });
        }
    }
    Ok(BinPartition {
        bins: partition_with(&order, &groups, scores, labels, 2),
        requested: 2,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn summary(p: &BinPartition) -> Vec<(usize, f64, f64)> {
        p.bins.iter().map(|b| (b.size(), b.mean_score, b.obs_freq)).collect()
    }

    #[test]
    fn two_clean_bins() {
        let p = msm_partition(&[0.1, 0.1, 0.9, 0.9], &[0, 0, 1, 1]).unwrap();
        assert_eq!(summary(&p), vec![(2, 0.1, 0.0), (2, 0.9, 1.0)]);
    }

    #[test]
    fn identical_scores_form_one_mass() {
        let p = msm_partition(&[0.4; 9], &[1, 0, 0, 1, 0, 0, 0, 1, 0]).unwrap();
        assert_eq!(p.bins.len(), 1);
        assert_eq!(p.bins[0].mean_score, 0.4);
        assert!((p.bins[0].obs_freq - 3.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn too_few_instances() {
        assert!(msm_partition(&[0.5], &[1]).is_err());
    }

    #[test]
    fn equal_mass_without_ties() {
        let scores: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let labels = vec![0, 0, 0, 0, 1, 0, 1, 1, 1, 1];
        let p = msm_partition(&scores, &labels).unwrap();
        let sizes: Vec<usize> = p.bins.iter().map(Bin::size).collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(hi - lo <= 1);
        assert!(is_monotone(&p.bins));
    }

    #[test]
    fn calibrated_sample_sweeps_above_two() {
        let mut hits = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (s, y): (Vec<f64>, Vec<u8>) = (0..1000)
                .map(|_| {
                    let p: f64 = rng.random();
                    (p, rng.random_bool(p) as u8)
                })
                .unzip();
            if msm_partition(&s, &y).unwrap().requested > 2 {
                hits += 1;
            }
        }
        assert!(hits >= 19, "{hits}");
    }

    proptest! {
        #[test]
        fn partition_covers_each_index_once(
            pts in proptest::collection::vec(((0u32..=10).prop_map(|v| v as f64 / 10.0), 0u8..=1), 2..80),
        ) {
            let (s, y): (Vec<f64>, Vec<u8>) = pts.into_iter().unzip();
            let p = msm_partition(&s, &y).unwrap();
            let mut all: Vec<usize> = p.bins.iter().flat_map(|b| b.members.clone()).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..s.len()).collect::<Vec<_>>());
            for w in p.bins.windows(2) {
                prop_assert!(w[0].mean_score < w[1].mean_score);
            }
            for b in &p.bins {
                prop_assert!((0.0..=1.0).contains(&b.mean_score) && (0.0..=1.0).contains(&b.obs_freq));
            }
        }

        #[test]
        fn permutation_invariant(
            pts in proptest::collection::vec(((0u32..=10).prop_map(|v| v as f64 / 10.0), 0u8..=1), 2..80),
            seed in 0u64..1000,
        ) {
            let mut shuffled = pts.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let (s1, y1): (Vec<f64>, Vec<u8>) = pts.into_iter().unzip();
            let (s2, y2): (Vec<f64>, Vec<u8>) = shuffled.into_iter().unzip();
            let a = msm_partition(&s1, &y1).unwrap();
            let b = msm_partition(&s2, &y2).unwrap();
            prop_assert_eq!(summary(&a), summary(&b));
        }
    }
}
