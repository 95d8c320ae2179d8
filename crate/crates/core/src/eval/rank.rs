//! Competition ranks and their nested-mean expectations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::measures::Direction;
use crate::error::{Error, Result};

/// `rank_i = 1 + #{j : v_j strictly better than v_i}`; ties share a rank.
pub fn rank_within(values: &[f64], direction: Direction) -> Result<Vec<usize>> {
    if values.is_empty() {
        return Err(Error::invalid("cannot rank an empty list"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("cannot rank NaN values"));
    }
    Ok(values
        .iter()
        .map(|&v| 1 + values.iter().filter(|&&other| direction.better(other, v)).count())
        .collect())
}

/// Ranks of competing entities for one measure, keyed by a context path such
/// as `[dataset, fold]` or `[model, dataset, fold]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub measure: String,
    pub direction: Direction,
    pub cells: BTreeMap<Vec<String>, BTreeMap<String, usize>>,
}

impl RankTable {
    pub fn new(measure: impl Into<String>, direction: Direction) -> Self {
        Self {
            measure: measure.into(),
            direction,
            cells: BTreeMap::new(),
        }
    }

    /// Ranks `values` (entity → value) within `context` and stores the result.
    pub fn add_context(&mut self, context: Vec<String>, values: &[(String, f64)]) -> Result<()> {
        let raw: Vec<f64> = values.iter().map(|(_, v)| *v).collect();
        let ranks = rank_within(&raw, self.direction)?;
        let cell = values.iter().map(|(e, _)| e.clone()).zip(ranks).collect();
        self.cells.insert(context, cell);
        Ok(())
    }

    pub fn entities(&self) -> BTreeSet<String> {
        self.cells.values().flat_map(|c| c.keys().cloned()).collect()
    }

    /// `entity@context` for every entity not ranked in some context.
    pub fn missing(&self) -> Vec<String> {
        let entities = self.entities();
        let mut missing = Vec::new();
        for (path, cell) in &self.cells {
            for e in &entities {
                if !cell.contains_key(e) {
                    missing.push(format!("{e}@{}", path.join("/")));
                }
            }
        }
        missing
    }
}

/// Mean over the last path component, then recursively over the shorter prefixes.
fn nested_mean(entries: &[(&[String], f64)]) -> f64 {
    if entries.iter().all(|(p, _)| p.is_empty()) {
        return entries.iter().map(|(_, v)| v).sum::<f64>() / entries.len() as f64;
    }
    let mut groups: BTreeMap<&String, Vec<(&[String], f64)>> = BTreeMap::new();
    for (path, v) in entries {
        groups.entry(&path[0]).or_default().push((&path[1..], *v));
    }
    groups.values().map(|g| nested_mean(g)).sum::<f64>() / groups.len() as f64
}

/// Expected rank of every entity as nested means over the context levels
/// (innermost level first). Every entity must be ranked in every context.
pub fn expected_rank(table: &RankTable) -> Result<BTreeMap<String, f64>> {
    let missing = table.missing();
    if !missing.is_empty() {
        return Err(Error::MissingCells(missing));
    }
    expected_rank_available(table)
}

/// Like [`expected_rank`], but an entity absent from some contexts is
/// averaged over the contexts where it was ranked.
pub fn expected_rank_available(table: &RankTable) -> Result<BTreeMap<String, f64>> {
    if table.cells.is_empty() {
        return Err(Error::invalid(format!("rank table for '{}' is empty", table.measure)));
    }
    let entities = table.entities();
    Ok(entities
        .into_iter()
        .map(|e| {
            let entries: Vec<(&[String], f64)> = table
                .cells
                .iter()
                .filter_map(|(path, cell)| cell.get(&e).map(|&r| (path.as_slice(), r as f64)))
                .collect();
            let mean = nested_mean(&entries);
            (e, mean)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(parts: &[&str]) -> Vec<String> {
        parts.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_within(&[3.0, 1.0, 2.0], Direction::LowerBetter).unwrap(), vec![3, 1, 2]);
        assert_eq!(rank_within(&[1.0, 1.0, 2.0], Direction::LowerBetter).unwrap(), vec![1, 1, 3]);
        assert_eq!(rank_within(&[5.0], Direction::HigherBetter).unwrap(), vec![1]);
        assert_eq!(rank_within(&[1.0, 1.0, 2.0], Direction::HigherBetter).unwrap(), vec![2, 2, 1]);
        assert!(rank_within(&[], Direction::LowerBetter).is_err());
    }

    #[test]
    fn expected_rank_examples() {
        let mut t = RankTable::new("m", Direction::LowerBetter);
        t.cells.insert(path(&["s1", "f1"]), [("a".to_string(), 1)].into());
        t.cells.insert(path(&["s2", "f1"]), [("a".to_string(), 3)].into());
        assert_eq!(expected_rank(&t).unwrap()["a"], 2.0);

        let mut single = RankTable::new("m", Direction::LowerBetter);
        single.cells.insert(path(&["s", "f"]), [("a".to_string(), 4)].into());
        assert_eq!(expected_rank(&single).unwrap()["a"], 4.0);
    }

    #[test]
    fn nested_means_weight_datasets_equally() {
        // nested: (1 + 4) / 2 = 2.5; flat mean over cells would be 2
        let mut t = RankTable::new("m", Direction::LowerBetter);
        t.cells.insert(path(&["s1", "f1"]), [("a".to_string(), 1)].into());
        t.cells.insert(path(&["s1", "f2"]), [("a".to_string(), 1)].into());
        t.cells.insert(path(&["s2", "f1"]), [("a".to_string(), 4)].into());
        assert_eq!(expected_rank(&t).unwrap()["a"], 2.5);
    }

    #[test]
    fn missing_cells_are_listed() {
        let mut t = RankTable::new("m", Direction::LowerBetter);
        t.cells.insert(path(&["s1", "f1"]), [("a".to_string(), 1), ("b".to_string(), 2)].into());
        t.cells.insert(path(&["s1", "f2"]), [("a".to_string(), 1)].into());
        match expected_rank(&t) {
            Err(Error::MissingCells(m)) => assert_eq!(m, vec!["b@s1/f2".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn available_ranks_skip_absent_contexts() {
        let mut t = RankTable::new("m", Direction::LowerBetter);
        t.cells.insert(path(&["s1", "f1"]), [("a".to_string(), 1), ("b".to_string(), 2)].into());
        t.cells.insert(path(&["s1", "f2"]), [("a".to_string(), 2), ("b".to_string(), 1)].into());
        t.cells.insert(path(&["s2", "f1"]), [("a".to_string(), 1)].into());
        assert!(expected_rank(&t).is_err());
        let r = expected_rank_available(&t).unwrap();
        assert_eq!(r["a"], (1.5 + 1.0) / 2.0);
        assert_eq!(r["b"], 1.5);
    }

    proptest! {
        #[test]
        fn strictly_better_ranks_lower(values in proptest::collection::vec(-5i32..5, 1..12)) {
            let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
            let r = rank_within(&v, Direction::LowerBetter).unwrap();
            for i in 0..v.len() {
                for j in 0..v.len() {
                    if v[i] < v[j] {
                        prop_assert!(r[i] < r[j]);
                    }
                    if v[i] == v[j] {
                        prop_assert_eq!(r[i], r[j]);
                    }
                }
            }
            prop_assert!(r.contains(&1));
            prop_assert!(r.iter().all(|&x| x >= 1 && x <= v.len()));
        }
    }
}
