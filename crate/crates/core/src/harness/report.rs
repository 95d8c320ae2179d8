//! Summaries of a completed run directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::parse_opt;
use super::run::{
    RunManifest, DELTAS_FILE, EXCLUSIONS_FILE, EXPECTED_X_FILE, EXPECTED_Y_FILE, FAILURES_FILE, METRICS_FILE,
    RANKS_X_FILE, RANKS_Y_FILE, RUN_FILE,
};
use crate::error::{Error, Result};
use crate::eval::{expected_rank_available, Direction, Measure, RankTable};

pub const SUMMARY_FILE: &str = "summary.json";

pub const QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Distribution of relative changes (%) of one measure for one calibrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeSummary {
    pub count: usize,
    pub improved: usize,
    pub degraded: usize,
    pub unchanged: usize,
    pub mean: Option<f64>,
    /// Values at the 5th, 25th, 50th, 75th and 95th percentiles.
    pub quantiles: Vec<Option<f64>>,
    pub fraction_improved: Option<f64>,
}

/// Linear interpolation between order statistics.
fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn summarize_changes(values: &[f64], direction: Direction) -> ChangeSummary {
    let improved = values.iter().filter(|&&v| direction.better(v, 0.0)).count();
    let degraded = values.iter().filter(|&&v| direction.better(0.0, v)).count();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len();
    ChangeSummary {
        count: n,
        improved,
        degraded,
        unchanged: n - improved - degraded,
        mean: (n > 0).then(|| values.iter().sum::<f64>() / n as f64),
        quantiles: QUANTILES.iter().map(|&p| quantile(&sorted, p)).collect(),
        fraction_improved: (n > 0).then(|| improved as f64 / n as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// measure → `learner/calibrator` → expected rank.
    pub expected_ranks_x: BTreeMap<String, BTreeMap<String, f64>>,
    /// measure → calibrator → expected rank.
    pub expected_ranks_y: BTreeMap<String, BTreeMap<String, f64>>,
    /// calibrator → measure → relative change distribution.
    pub relative_changes: BTreeMap<String, BTreeMap<String, ChangeSummary>>,
    pub failed_cells: usize,
    pub excluded_contexts: usize,
}

fn reader(dir: &Path, name: &str) -> Result<csv::Reader<File>> {
    Ok(csv::Reader::from_reader(File::open(dir.join(name))?))
}

fn column(headers: &csv::StringRecord, name: &str, file: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Dataset(format!("{file}: no column '{name}'")))
}

fn cell_keys(dir: &Path, file: &str) -> Result<BTreeSet<(String, String, String, usize)>> {
    let mut rdr = reader(dir, file)?;
    let h = rdr.headers()?.clone();
    let d = column(&h, "dataset_id", file)?;
    let l = column(&h, "learner_id", file)?;
    let c = column(&h, "calibrator_id", file)?;
    let f = column(&h, "fold", file)?;
    let mut keys = BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let fold = rec[f]
            .parse()
            .map_err(|_| Error::Dataset(format!("{file}: bad fold '{}'", &rec[f])))?;
        keys.insert((rec[d].to_string(), rec[l].to_string(), rec[c].to_string(), fold));
    }
    Ok(keys)
}

/// `(table, measure, context, entity)` of every excluded cell.
fn read_exclusions(dir: &Path) -> Result<BTreeSet<(String, String, String, String)>> {
    let mut rdr = reader(dir, EXCLUSIONS_FILE)?;
    let h = rdr.headers()?.clone();
    let cols = ["table", "measure", "context", "entity"]
        .iter()
        .map(|c| column(&h, c, EXCLUSIONS_FILE))
        .collect::<Result<Vec<usize>>>()?;
    let mut out = BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.insert((
            rec[cols[0]].to_string(),
            rec[cols[1]].to_string(),
            rec[cols[2]].to_string(),
            rec[cols[3]].to_string(),
        ));
    }
    Ok(out)
}

/// Rebuilds rank tables from a ranks file; `context` and `entity` name the columns.
fn read_rank_tables(dir: &Path, file: &str, context: &[&str], entity: &[&str]) -> Result<BTreeMap<String, RankTable>> {
    let mut rdr = reader(dir, file)?;
    let h = rdr.headers()?.clone();
    let m = column(&h, "measure", file)?;
    let dcol = column(&h, "direction", file)?;
    let r = column(&h, "rank", file)?;
    let ctx: Vec<usize> = context.iter().map(|c| column(&h, c, file)).collect::<Result<_>>()?;
    let ent: Vec<usize> = entity.iter().map(|c| column(&h, c, file)).collect::<Result<_>>()?;
    let mut tables: BTreeMap<String, RankTable> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let direction: Direction = rec[dcol].parse()?;
        let table = tables
            .entry(rec[m].to_string())
            .or_insert_with(|| RankTable::new(&rec[m], direction));
        let path: Vec<String> = ctx.iter().map(|&i| rec[i].to_string()).collect();
        let name = ent.iter().map(|&i| &rec[i]).collect::<Vec<_>>().join("/");
        let rank = rec[r]
            .parse()
            .map_err(|_| Error::Dataset(format!("{file}: bad rank '{}'", &rec[r])))?;
        table.cells.entry(path).or_default().insert(name, rank);
    }
    Ok(tables)
}

/// Reads a run directory and writes `summary.json` next to it.
pub fn emit_report(run_dir: &Path) -> Result<Summary> {
    let required = [
        RUN_FILE,
        METRICS_FILE,
        FAILURES_FILE,
        DELTAS_FILE,
        RANKS_X_FILE,
        RANKS_Y_FILE,
        EXPECTED_X_FILE,
        EXPECTED_Y_FILE,
        EXCLUSIONS_FILE,
    ];
    let missing: Vec<String> = required
        .iter()
        .filter(|f| !run_dir.join(f).is_file())
        .map(|f| format!("file {f}"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingCells(missing));
    }
    let manifest: RunManifest = serde_json::from_reader(File::open(run_dir.join(RUN_FILE))?)?;
    let mut present = cell_keys(run_dir, METRICS_FILE)?;
    present.extend(cell_keys(run_dir, FAILURES_FILE)?);
    let missing: Vec<String> = manifest
        .cells
        .iter()
        .filter(|k| !present.contains(&(k.dataset_id.clone(), k.learner_id.clone(), k.calibrator_id.clone(), k.fold)))
        .map(|k| k.canonical())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingCells(missing));
    }

    let excluded = read_exclusions(run_dir)?;
    let expected = |id: &str, tables: BTreeMap<String, RankTable>| -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
        let unexplained: Vec<String> = tables
            .iter()
            .flat_map(|(m, t)| {
                t.cells.iter().flat_map(move |(path, cell)| {
                    t.entities()
                        .into_iter()
                        .filter(|e| !cell.contains_key(e))
                        .map(move |e| (m.clone(), path.join("/"), e))
                        .collect::<Vec<_>>()
                })
            })
            .filter(|(m, c, e)| !excluded.contains(&(id.to_string(), m.clone(), c.clone(), e.clone())))
            .map(|(m, c, e)| format!("{id}:{m}:{e}@{c}"))
            .collect();
        if !unexplained.is_empty() {
            return Err(Error::MissingCells(unexplained));
        }
        tables
            .into_iter()
            .map(|(m, t)| Ok((m, expected_rank_available(&t)?)))
            .collect()
    };
    let expected_ranks_x = expected("x", read_rank_tables(
        run_dir,
        RANKS_X_FILE,
        &["dataset_id", "fold"],
        &["learner_id", "calibrator_id"],
    )?)?;
    let expected_ranks_y = expected("y", read_rank_tables(
        run_dir,
        RANKS_Y_FILE,
        &["learner_id", "dataset_id", "fold"],
        &["calibrator_id"],
    )?)?;

    let mut rdr = reader(run_dir, DELTAS_FILE)?;
    let h = rdr.headers()?.clone();
    let cal = column(&h, "calibrator_id", DELTAS_FILE)?;
    let rel: Vec<(Measure, usize)> = Measure::ALL
        .iter()
        .map(|&m| Ok((m, column(&h, &format!("{m}_relative_pct"), DELTAS_FILE)?)))
        .collect::<Result<_>>()?;
    let mut changes: BTreeMap<String, BTreeMap<Measure, Vec<f64>>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let per = changes.entry(rec[cal].to_string()).or_default();
        for &(m, i) in &rel {
            let values = per.entry(m).or_default();
            if let Some(v) = parse_opt(&rec[i])? {
                values.push(v);
            }
        }
    }
    let relative_changes = changes
        .into_iter()
        .map(|(c, per)| {
            let summaries = per
                .into_iter()
                .map(|(m, v)| (m.id().to_string(), summarize_changes(&v, m.default_direction())))
                .collect();
            (c, summaries)
        })
        .collect();

    let summary = Summary {
        expected_ranks_x,
        expected_ranks_y,
        relative_changes,
        failed_cells: manifest.failed_cells,
        excluded_contexts: manifest.excluded_contexts,
    };
    serde_json::to_writer_pretty(File::create(run_dir.join(SUMMARY_FILE))?, &summary)?;
    Ok(summary)
}
