//! Dataset and score-file readers with the minimal preprocessing convention:
//! categoricals become first-appearance integer codes (missing is its own
//! code), everything else is coerced to a real with missing or unparseable
//! values set to 0.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::format_float;
use crate::data::{BinaryLabeledScores, DatasetTable, TrueConditionals};
use crate::error::{Error, Result};
use crate::eval::PrecomputedFold;

const MISSING_TOKENS: [&str; 8] = ["", "NA", "N/A", "na", "NaN", "nan", "null", "?"];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IngestOptions {
    pub target: String,
    /// Target value mapped to label 1. Required unless the target is 0/1 or true/false.
    pub positive: Option<String>,
    /// Column holding known `P(Y = 1 | x)`, excluded from the features.
    pub truth_col: Option<String>,
    /// Columns forced to categorical coding regardless of content.
    #[serde(default)]
    pub categorical: Vec<String>,
}

fn is_missing(v: &str) -> bool {
    MISSING_TOKENS.contains(&v)
}

fn parse_finite(v: &str) -> Option<f64> {
    v.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Dense codes in order of first appearance; missing values share one code.
fn categorical_codes(values: &[&str]) -> Vec<f64> {
    let mut codes: HashMap<Option<&str>, usize> = HashMap::new();
    values
        .iter()
        .map(|&v| {
            let key = (!is_missing(v)).then_some(v);
            let next = codes.len();
            *codes.entry(key).or_insert(next) as f64
        })
        .collect()
}

fn numeric_values(values: &[&str]) -> Vec<f64> {
    values.iter().map(|v| parse_finite(v).unwrap_or(0.0)).collect()
}

fn positive_label(target: &str, distinct: &[&str], positive: Option<&str>) -> Result<String> {
    if let Some(p) = positive {
        if !distinct.contains(&p) {
            return Err(Error::Dataset(format!(
                "positive label '{p}' does not occur in target column '{target}' (values: {})",
                distinct.join(", ")
            )));
        }
        return Ok(p.to_string());
    }
    let numeric: Vec<Option<f64>> = distinct.iter().map(|v| parse_finite(v)).collect();
    if let [Some(a), Some(b)] = numeric[..] {
        if (a.min(b), a.max(b)) == (0.0, 1.0) {
            let i = if a == 1.0 { 0 } else { 1 };
            return Ok(distinct[i].to_string());
        }
    }
    if let Some(t) = distinct.iter().find(|v| v.eq_ignore_ascii_case("true")) {
        if distinct.iter().any(|v| v.eq_ignore_ascii_case("false")) {
            return Ok(t.to_string());
        }
    }
    Err(Error::Dataset(format!(
        "cannot tell which target value is positive among {}; pass a positive label",
        distinct.join(", ")
    )))
}

/// Reads a headed CSV into features, labels and optional known conditionals.
pub fn ingest_reader<R: Read>(
    dataset_id: &str,
    reader: R,
    options: &IngestOptions,
) -> Result<(DatasetTable, Option<TrueConditionals>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    if records.is_empty() {
        return Err(Error::Dataset(format!("{dataset_id}: no data rows")));
    }
    let column = |name: &str| headers.iter().position(|h| h == name);
    let target = column(&options.target)
        .ok_or_else(|| Error::Dataset(format!("{dataset_id}: no target column '{}'", options.target)))?;
    let truth = match &options.truth_col {
        Some(name) => Some(column(name).ok_or_else(|| Error::Dataset(format!("{dataset_id}: no truth column '{name}'")))?),
        None => None,
    };
    fn cell(r: &csv::StringRecord, c: usize) -> &str {
        r.get(c).unwrap_or("")
    }

    let target_values: Vec<&str> = records.iter().map(|r| cell(r, target)).collect();
    if let Some(row) = target_values.iter().position(|v| is_missing(v)) {
        return Err(Error::Dataset(format!("{dataset_id}: missing target value in data row {}", row + 1)));
    }
    let mut distinct: Vec<&str> = Vec::new();
    for &v in &target_values {
        if !distinct.contains(&v) {
            distinct.push(v);
        }
    }
    if distinct.len() != 2 {
        return Err(Error::Dataset(format!(
            "{dataset_id}: target column '{}' has {} distinct values, expected 2",
            options.target,
            distinct.len()
        )));
    }
    let positive = positive_label(&options.target, &distinct, options.positive.as_deref())?;
    let labels: Vec<u8> = target_values.iter().map(|&v| u8::from(v == positive)).collect();

    let q = truth
        .map(|c| {
            records
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    parse_finite(cell(r, c)).filter(|q| (0.0..=1.0).contains(q)).ok_or_else(|| {
                        Error::Dataset(format!("{dataset_id}: truth value '{}' in data row {} is not in [0, 1]", cell(r, c), i + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()
                .and_then(TrueConditionals::new)
        })
        .transpose()?;

    let mut columns = Vec::new();
    for (c, name) in headers.iter().enumerate() {
        if c == target || Some(c) == truth {
            continue;
        }
        let values: Vec<&str> = records.iter().map(|r| cell(r, c)).collect();
        let categorical = options.categorical.contains(name)
            || values.iter().all(|v| is_missing(v) || parse_finite(v).is_none())
                && values.iter().any(|v| !is_missing(v));
        columns.push(if categorical { categorical_codes(&values) } else { numeric_values(&values) });
    }
    if columns.is_empty() {
        return Err(Error::Dataset(format!("{dataset_id}: no feature columns")));
    }
    let rows = (0..records.len()).map(|i| columns.iter().map(|col| col[i]).collect()).collect();
    Ok((DatasetTable::new(dataset_id, rows, labels)?, q))
}

/// Reads a dataset file; the dataset id is the file stem.
pub fn ingest_dataset(path: &Path, options: &IngestOptions) -> Result<(DatasetTable, Option<TrueConditionals>)> {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    ingest_reader(&id, File::open(path)?, options)
}

/// Writes features as `x1..xd`, the label as `y` and, when known, `q`.
pub fn write_dataset_csv<W: Write>(writer: W, table: &DatasetTable, truth: Option<&TrueConditionals>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=table.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    if truth.is_some() {
        header.push("q".into());
    }
    w.write_record(&header)?;
    for (i, row) in table.rows().iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        rec.push(table.labels()[i].to_string());
        if let Some(t) = truth {
            rec.push(format_float(t.values()[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    dataset_id: String,
    fold: usize,
    split: String,
    row_id: u64,
    label: u8,
    score: f64,
    #[serde(default)]
    q: Option<f64>,
}

#[derive(Default)]
struct FoldRows {
    cal: Vec<(u64, f64, u8)>,
    test: Vec<(u64, f64, u8, Option<f64>)>,
}

/// Precomputed scores keyed by dataset id and fold, from a CSV with columns
/// `dataset_id, fold, split, row_id, label, score` and optional `q`.
/// Rows of the `fit` split are checked and otherwise ignored.
pub fn read_score_reader<R: Read>(reader: R) -> Result<BTreeMap<String, BTreeMap<usize, PrecomputedFold>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut grouped: BTreeMap<(String, usize), FoldRows> = BTreeMap::new();
    let mut seen = std::collections::HashSet::new();
    for (line, row) in rdr.deserialize::<ScoreRow>().enumerate() {
        let row = row?;
        let at = || format!("score file data row {}", line + 1);
        if row.fold == 0 {
            return Err(Error::Dataset(format!("{}: fold ids start at 1", at())));
        }
        if row.label > 1 {
            return Err(Error::Dataset(format!("{}: label must be 0 or 1", at())));
        }
        if !seen.insert((row.dataset_id.clone(), row.fold, row.split.clone(), row.row_id)) {
            return Err(Error::Dataset(format!("{}: duplicate row id {}", at(), row.row_id)));
        }
        let entry = grouped.entry((row.dataset_id, row.fold)).or_default();
        match row.split.as_str() {
            "fit" => {}
            "cal" => entry.cal.push((row.row_id, row.score, row.label)),
            "test" => entry.test.push((row.row_id, row.score, row.label, row.q)),
            other => return Err(Error::Dataset(format!("{}: unknown split '{other}'", at()))),
        }
    }
    if grouped.is_empty() {
        return Err(Error::Dataset("score file has no rows".into()));
    }
    let mut out: BTreeMap<String, BTreeMap<usize, PrecomputedFold>> = BTreeMap::new();
    for ((dataset, fold), mut rows) in grouped {
        let ctx = format!("{dataset} fold {fold}");
        if rows.test.is_empty() {
            return Err(Error::Dataset(format!("{ctx}: no test rows")));
        }
        rows.cal.sort_by_key(|r| r.0);
        rows.test.sort_by_key(|r| r.0);
        let cal = if rows.cal.is_empty() {
            None
        } else {
            Some(BinaryLabeledScores::new(
                rows.cal.iter().map(|r| r.1).collect(),
                rows.cal.iter().map(|r| r.2).collect(),
            )?)
        };
        let test = BinaryLabeledScores::new(
            rows.test.iter().map(|r| r.1).collect(),
            rows.test.iter().map(|r| r.2).collect(),
        )?;
        let qs: Vec<Option<f64>> = rows.test.iter().map(|r| r.3).collect();
        let truth = if qs.iter().all(Option::is_some) {
            Some(TrueConditionals::new(qs.into_iter().flatten().collect())?)
        } else if qs.iter().all(Option::is_none) {
            None
        } else {
            return Err(Error::Dataset(format!("{ctx}: q given for some test rows but not all")));
        };
        out.entry(dataset).or_default().insert(fold, PrecomputedFold { cal, test, truth });
    }
    Ok(out)
}

pub fn read_score_file(path: &Path) -> Result<BTreeMap<String, BTreeMap<usize, PrecomputedFold>>> {
    read_score_reader(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(target: &str) -> IngestOptions {
        IngestOptions {
            target: target.into(),
            ..IngestOptions::default()
        }
    }

    #[test]
    fn categorical_first_appearance_with_missing_group() {
        assert_eq!(categorical_codes(&["a", "b", "a", ""]), vec![0.0, 1.0, 0.0, 2.0]);
        assert_eq!(categorical_codes(&["", "b", "NA", "c"]), vec![0.0, 1.0, 0.0, 2.0]);
    }

    #[test]
    fn numeric_coercion() {
        assert_eq!(numeric_values(&["1.5", "x", ""]), vec![1.5, 0.0, 0.0]);
        assert_eq!(numeric_values(&["inf", "-2"]), vec![0.0, -2.0]);
    }

    #[test]
    fn mixed_file() {
        let csv = "color,size,flag,y\nred,1.5,1,yes\nblue,x,0,no\nred,,1,yes\n,2,0,no\n";
        let o = IngestOptions {
            positive: Some("yes".into()),
            ..opts("y")
        };
        let (t, q) = ingest_reader("d", csv.as_bytes(), &o).unwrap();
        assert!(q.is_none());
        assert_eq!(t.labels(), &[1, 0, 1, 0]);
        let col = |j: usize| t.rows().iter().map(|r| r[j]).collect::<Vec<_>>();
        assert_eq!(col(0), vec![0.0, 1.0, 0.0, 2.0]);
        assert_eq!(col(1), vec![1.5, 0.0, 0.0, 2.0]);
        assert_eq!(col(2), vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn forced_categorical() {
        let csv = "zip,y\n10001,1\n90210,0\n10001,0\n";
        let o = IngestOptions {
            categorical: vec!["zip".into()],
            ..opts("y")
        };
        let (t, _) = ingest_reader("d", csv.as_bytes(), &o).unwrap();
        assert_eq!(t.rows().iter().map(|r| r[0]).collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn target_errors() {
        let csv = "a,y\n1,0\n2,1\n";
        assert!(matches!(ingest_reader("d", csv.as_bytes(), &opts("label")), Err(Error::Dataset(_))));
        let three = "a,y\n1,0\n2,1\n3,2\n";
        assert!(ingest_reader("d", three.as_bytes(), &opts("y")).is_err());
        let words = "a,y\n1,cat\n2,dog\n";
        assert!(ingest_reader("d", words.as_bytes(), &opts("y")).is_err());
        assert!(ingest_reader("d", "a,y\n".as_bytes(), &opts("y")).is_err());
        let (t, _) = ingest_reader("d", "a,y\n1,True\n2,False\n".as_bytes(), &opts("y")).unwrap();
        assert_eq!(t.labels(), &[1, 0]);
    }

    #[test]
    fn truth_column_is_not_a_feature() {
        let csv = "x1,y,q\n0.5,1,0.7\n-0.5,0,0.2\n";
        let o = IngestOptions {
            truth_col: Some("q".into()),
            ..opts("y")
        };
        let (t, q) = ingest_reader("d", csv.as_bytes(), &o).unwrap();
        assert_eq!(t.dim(), 1);
        assert_eq!(q.unwrap().values(), &[0.7, 0.2]);
    }

    #[test]
    fn dataset_round_trip() {
        let table = DatasetTable::new("t", vec![vec![0.1, -3.25], vec![1e-300, 7.0]], vec![0, 1]).unwrap();
        let truth = TrueConditionals::new(vec![0.25, 0.75]).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &table, Some(&truth)).unwrap();
        let o = IngestOptions {
            truth_col: Some("q".into()),
            ..opts("y")
        };
        let (back, q) = ingest_reader("t", buf.as_slice(), &o).unwrap();
        assert_eq!(back, table);
        assert_eq!(q.unwrap(), truth);
    }

    #[test]
    fn score_file() {
        let csv = "dataset_id,fold,split,row_id,label,score\n\
                   d,1,fit,0,1,0.9\nd,1,cal,2,0,0.3\nd,1,cal,1,1,0.8\nd,1,test,3,1,0.6\nd,2,test,0,0,0.1\n";
        let folds = read_score_reader(csv.as_bytes()).unwrap();
        let d = &folds["d"];
        assert_eq!(d.len(), 2);
        assert_eq!(d[&1].cal.as_ref().unwrap().scores(), &[0.8, 0.3]);
        assert_eq!(d[&1].test.labels(), &[1]);
        assert!(d[&2].cal.is_none());
        let bad = "dataset_id,fold,split,row_id,label,score\nd,1,train,0,1,0.9\n";
        assert!(read_score_reader(bad.as_bytes()).is_err());
        let dup = "dataset_id,fold,split,row_id,label,score\nd,1,test,0,1,0.9\nd,1,test,0,0,0.2\n";
        assert!(read_score_reader(dup.as_bytes()).is_err());
    }
}
