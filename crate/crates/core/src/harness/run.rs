//! Executes the (dataset × fold × learner × arm) grid and writes the run directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BenchConfig, DatasetSource};
use super::ingest::{ingest_dataset, read_score_file};
use super::{format_float, format_opt};
use crate::data::{derive_seed, DatasetTable, RunKey, TrueConditionals};
use crate::error::{Error, Result};
use crate::eval::{
    delta, expected_rank_available, run_cell, stratified_kfold, CellSource, Direction, FoldAssignment, Measure, PrecomputedFold,
    RankTable, NONE_ARM,
};
use crate::metrics::MetricReport;
use crate::synth::generate;

pub const METRICS_FILE: &str = "metrics.csv";
pub const DELTAS_FILE: &str = "deltas.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const EXCLUSIONS_FILE: &str = "exclusions.csv";
pub const RANKS_X_FILE: &str = "ranks_x.csv";
pub const RANKS_Y_FILE: &str = "ranks_y.csv";
pub const EXPECTED_X_FILE: &str = "expected_ranks_x.csv";
pub const EXPECTED_Y_FILE: &str = "expected_ranks_y.csv";
pub const RUN_FILE: &str = "run.json";

pub const METRIC_COLUMNS: [&str; 34] = [
    "dataset_id",
    "learner_id",
    "calibrator_id",
    "fold",
    "n",
    "log_loss",
    "brier",
    "spiegelhalter_z",
    "abs_z",
    "ece",
    "eci_global",
    "eci_over",
    "eci_under",
    "eci_balance",
    "auc_roc",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "tp",
    "fp",
    "tn",
    "fn",
    "precision_undefined",
    "recall_undefined",
    "f1_undefined",
    "true_mae",
    "true_mse",
    "train_wall",
    "train_cpu",
    "calibrate_wall",
    "calibrate_cpu",
    "inference_wall",
    "inference_cpu",
];

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: BenchConfig,
    pub cells: Vec<RunKey>,
    pub metric_rows: usize,
    pub delta_rows: usize,
    pub failed_cells: usize,
    pub excluded_contexts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub out: PathBuf,
    pub cells: usize,
    pub metric_rows: usize,
    pub delta_rows: usize,
    pub failures: Vec<(RunKey, String)>,
}

impl RunOutcome {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }
}

enum Loaded {
    Table {
        table: DatasetTable,
        truth: Option<TrueConditionals>,
    },
    Scores {
        dataset_id: String,
        learner_id: String,
        folds: BTreeMap<usize, PrecomputedFold>,
    },
}

fn load(sources: &[DatasetSource]) -> Result<Vec<Loaded>> {
    let mut loaded = Vec::new();
    for source in sources {
        match source {
            DatasetSource::Csv { path, options } => {
                let (table, truth) = ingest_dataset(path, options)?;
                loaded.push(Loaded::Table { table, truth });
            }
            DatasetSource::Synth { spec } => {
                let (table, truth) = generate(spec)?;
                loaded.push(Loaded::Table {
                    table,
                    truth: Some(truth),
                });
            }
            DatasetSource::Scores { path, learner_id } => {
                for (dataset_id, folds) in read_score_file(path)? {
                    loaded.push(Loaded::Scores {
                        dataset_id,
                        learner_id: learner_id.clone(),
                        folds,
                    });
                }
            }
        }
    }
    let mut tables = BTreeSet::new();
    let mut scored = BTreeSet::new();
    for l in &loaded {
        let fresh = match l {
            Loaded::Table { table, .. } => tables.insert(table.dataset_id.clone()),
            Loaded::Scores {
                dataset_id, learner_id, ..
            } => scored.insert((dataset_id.clone(), learner_id.clone())),
        };
        if !fresh {
            let id = match l {
                Loaded::Table { table, .. } => table.dataset_id.clone(),
                Loaded::Scores { dataset_id, .. } => dataset_id.clone(),
            };
            return Err(Error::invalid(format!("dataset '{id}' is configured twice")));
        }
    }
    Ok(loaded)
}

enum TaskSource<'a> {
    Cell(CellSource<'a>),
    Failed(String),
}

struct Task<'a> {
    key: RunKey,
    source: TaskSource<'a>,
}

fn build_tasks<'a>(
    config: &BenchConfig,
    loaded: &'a [Loaded],
    folds: &'a [Vec<std::result::Result<FoldAssignment, String>>],
) -> Vec<Task<'a>> {
    let arms = config.arms();
    let mut tasks = Vec::new();
    for (l, assignments) in loaded.iter().zip(folds) {
        match l {
            Loaded::Table { table, truth } => {
                for (repeat, assignment) in assignments.iter().enumerate() {
                    for local in 1..=config.k {
                        let fold = repeat * config.k + local;
                        for learner in &config.learners {
                            for arm in &arms {
                                let key = RunKey::new(learner.id(), arm.as_str(), table.dataset_id.as_str(), fold);
                                let source = match assignment {
                                    Ok(f) => TaskSource::Cell(CellSource::Table {
                                        table,
                                        truth: truth.as_ref(),
                                        folds: f,
                                    }),
                                    Err(e) => TaskSource::Failed(e.clone()),
                                };
                                tasks.push(Task { key, source });
                            }
                        }
                    }
                }
            }
            Loaded::Scores {
                dataset_id,
                learner_id,
                folds,
            } => {
                for (&fold, data) in folds {
                    for arm in &arms {
                        tasks.push(Task {
                            key: RunKey::new(learner_id.as_str(), arm.as_str(), dataset_id.as_str(), fold),
                            source: TaskSource::Cell(CellSource::Precomputed(data)),
                        });
                    }
                }
            }
        }
    }
    tasks
}

type CellResults = BTreeMap<RunKey, std::result::Result<MetricReport, String>>;

/// Runs every cell of the configured grid and writes the run directory.
///
/// Cell failures are recorded, not fatal; configuration, ingestion and I/O
/// errors are returned.
pub fn run_benchmark(config: &BenchConfig) -> Result<RunOutcome> {
    config.validate()?;
    let loaded = load(&config.datasets)?;
    let folds: Vec<Vec<std::result::Result<FoldAssignment, String>>> = loaded
        .iter()
        .map(|l| match l {
            Loaded::Table { table, .. } => (0..config.repeats)
                .map(|r| {
                    let seed = derive_seed(config.master_seed, &["folds", &table.dataset_id, &r.to_string()]);
                    stratified_kfold(table.labels(), config.k, seed, false).map_err(|e| e.to_string())
                })
                .collect(),
            Loaded::Scores { .. } => Vec::new(),
        })
        .collect();
    let tasks = build_tasks(config, &loaded, &folds);
    let cell_config = config.cell_config();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(RunKey, std::result::Result<MetricReport, String>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                let r = match &t.source {
                    TaskSource::Cell(source) => run_cell(&t.key, *source, &cell_config).map_err(|e| e.to_string()),
                    TaskSource::Failed(e) => Err(e.clone()),
                };
                (t.key.clone(), r)
            })
            .collect()
    });
    let cells: CellResults = results.into_iter().collect();
    write_run(config, &cells)
}

fn create(dir: &Path, name: &str) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(File::create(dir.join(name))?))
}

fn metric_record(key: &RunKey, r: &MetricReport) -> Vec<String> {
    let c = &r.confusion;
    let t = &r.timings;
    let mut rec = vec![
        key.dataset_id.clone(),
        key.learner_id.clone(),
        key.calibrator_id.clone(),
        key.fold.to_string(),
        r.n.to_string(),
    ];
    rec.extend(
        [
            Some(r.log_loss),
            Some(r.brier),
            r.spiegelhalter_z,
            r.spiegelhalter_z.map(f64::abs),
            Some(r.ece),
            Some(r.eci.global),
            r.eci.over,
            r.eci.under,
            r.eci.balance,
            r.auc_roc,
            Some(c.accuracy),
            Some(c.precision),
            Some(c.recall),
            Some(c.f1),
        ]
        .map(format_opt),
    );
    rec.extend([c.tp, c.fp, c.tn, c.fn_].map(|v| v.to_string()));
    rec.extend([c.precision_undefined, c.recall_undefined, c.f1_undefined].map(|v| v.to_string()));
    rec.push(format_opt(r.true_calibration.map(|e| e.mae)));
    rec.push(format_opt(r.true_calibration.map(|e| e.mse)));
    rec.extend(
        [
            t.train_wall,
            t.train_cpu,
            t.calibrate_wall,
            t.calibrate_cpu,
            t.inference_wall,
            t.inference_cpu,
        ]
        .map(format_float),
    );
    rec
}

fn base_key(key: &RunKey) -> RunKey {
    RunKey {
        calibrator_id: NONE_ARM.to_string(),
        ..key.clone()
    }
}

fn direction_of(m: Measure) -> Direction {
    m.default_direction()
}

const SEP: char = '\u{1f}';

fn entity(learner: &str, calibrator: &str) -> String {
    format!("{learner}{SEP}{calibrator}")
}

struct Exclusion {
    table: &'static str,
    measure: Measure,
    context: Vec<String>,
    entity: String,
}

/// Values of one measure per context; `None` marks a failed or undefined cell.
type Contexts = BTreeMap<Vec<String>, BTreeMap<String, Option<f64>>>;

/// Ranks the defined values of every context; failed or undefined cells are
/// left out of their context and recorded as exclusions.
fn rank_contexts(
    table_id: &'static str,
    measure: Measure,
    contexts: &Contexts,
    exclusions: &mut Vec<Exclusion>,
) -> Result<Option<RankTable>> {
    let mut table = RankTable::new(measure.id(), direction_of(measure));
    for (context, values) in contexts {
        let mut present = Vec::new();
        for (e, v) in values {
            match v {
                Some(v) => present.push((e.clone(), *v)),
                None => exclusions.push(Exclusion {
                    table: table_id,
                    measure,
                    context: context.clone(),
                    entity: e.replace(SEP, "/"),
                }),
            }
        }
        if !present.is_empty() {
            table.add_context(context.clone(), &present)?;
        }
    }
    Ok((!table.cells.is_empty()).then_some(table))
}

fn write_run(config: &BenchConfig, cells: &CellResults) -> Result<RunOutcome> {
    let dir = &config.out;
    fs::create_dir_all(dir)?;

    let mut metrics = create(dir, METRICS_FILE)?;
    metrics.write_record(METRIC_COLUMNS)?;
    let mut failures_w = create(dir, FAILURES_FILE)?;
    failures_w.write_record(["dataset_id", "learner_id", "calibrator_id", "fold", "error"])?;
    let mut failures = Vec::new();
    let mut metric_rows = 0;
    for (key, r) in cells {
        match r {
            Ok(report) => {
                metrics.write_record(metric_record(key, report))?;
                metric_rows += 1;
            }
            Err(e) => {
                failures_w.write_record([
                    key.dataset_id.as_str(),
                    &key.learner_id,
                    &key.calibrator_id,
                    &key.fold.to_string(),
                    e,
                ])?;
                failures.push((key.clone(), e.clone()));
            }
        }
    }
    metrics.flush()?;
    failures_w.flush()?;

    let mut deltas = create(dir, DELTAS_FILE)?;
    let mut header = vec!["dataset_id".to_string(), "learner_id".into(), "calibrator_id".into(), "fold".into()];
    for m in Measure::ALL {
        header.push(format!("{m}_marginal"));
        header.push(format!("{m}_relative_pct"));
    }
    deltas.write_record(&header)?;
    let mut delta_rows = 0;
    for (key, r) in cells {
        if key.calibrator_id == NONE_ARM {
            continue;
        }
        let (Ok(cal), Some(Ok(base))) = (r, cells.get(&base_key(key))) else {
            continue;
        };
        let mut rec = vec![
            key.dataset_id.clone(),
            key.learner_id.clone(),
            key.calibrator_id.clone(),
            key.fold.to_string(),
        ];
        for m in Measure::ALL {
            match (m.extract(base), m.extract(cal)) {
                (Some(b), Some(c)) => {
                    let (marginal, relative) = delta(b, c);
                    rec.push(format_float(marginal));
                    rec.push(format_opt(relative));
                }
                _ => rec.extend([String::new(), String::new()]),
            }
        }
        deltas.write_record(&rec)?;
        delta_rows += 1;
    }
    deltas.flush()?;

    let mut exclusions = Vec::new();
    let mut ranks_x = create(dir, RANKS_X_FILE)?;
    ranks_x.write_record([
        "measure",
        "direction",
        "dataset_id",
        "fold",
        "learner_id",
        "calibrator_id",
        "value",
        "rank",
    ])?;
    let mut expected_x = create(dir, EXPECTED_X_FILE)?;
    expected_x.write_record(["measure", "direction", "learner_id", "calibrator_id", "expected_rank"])?;
    let mut ranks_y = create(dir, RANKS_Y_FILE)?;
    ranks_y.write_record([
        "measure",
        "direction",
        "learner_id",
        "dataset_id",
        "fold",
        "calibrator_id",
        "marginal",
        "rank",
    ])?;
    let mut expected_y = create(dir, EXPECTED_Y_FILE)?;
    expected_y.write_record(["measure", "direction", "calibrator_id", "expected_rank"])?;

    for m in Measure::ALL {
        let dir_id = direction_of(m).id();
        let mut x: Contexts = BTreeMap::new();
        let mut y: Contexts = BTreeMap::new();
        for (key, r) in cells {
            let value = r.as_ref().ok().and_then(|rep| m.extract(rep));
            x.entry(vec![key.dataset_id.clone(), key.fold.to_string()])
                .or_default()
                .insert(entity(&key.learner_id, &key.calibrator_id), value);
            if key.calibrator_id != NONE_ARM {
                let base = cells.get(&base_key(key)).and_then(|b| b.as_ref().ok()).and_then(|b| m.extract(b));
                let marginal = value.zip(base).map(|(c, b)| delta(b, c).0);
                y.entry(vec![key.learner_id.clone(), key.dataset_id.clone(), key.fold.to_string()])
                    .or_default()
                    .insert(key.calibrator_id.clone(), marginal);
            }
        }
        if let Some(table) = rank_contexts("x", m, &x, &mut exclusions)? {
            for (context, ranks) in &table.cells {
                for (e, rank) in ranks {
                    let (learner, calibrator) = e.split_once(SEP).expect("entity separator");
                    let value = x[context][e].expect("ranked values are defined");
                    ranks_x.write_record([
                        m.id(),
                        dir_id,
                        &context[0],
                        &context[1],
                        learner,
                        calibrator,
                        &format_float(value),
                        &rank.to_string(),
                    ])?;
                }
            }
            for (e, r) in expected_rank_available(&table)? {
                let (learner, calibrator) = e.split_once(SEP).expect("entity separator");
                expected_x.write_record([m.id(), dir_id, learner, calibrator, &format_float(r)])?;
            }
        }
        if let Some(table) = rank_contexts("y", m, &y, &mut exclusions)? {
            for (context, ranks) in &table.cells {
                for (calibrator, rank) in ranks {
                    let value = y[context][calibrator].expect("ranked values are defined");
                    ranks_y.write_record([
                        m.id(),
                        dir_id,
                        &context[0],
                        &context[1],
                        &context[2],
                        calibrator,
                        &format_float(value),
                        &rank.to_string(),
                    ])?;
                }
            }
            for (calibrator, r) in expected_rank_available(&table)? {
                expected_y.write_record([m.id(), dir_id, &calibrator, &format_float(r)])?;
            }
        }
    }
    for w in [&mut ranks_x, &mut ranks_y, &mut expected_x, &mut expected_y] {
        w.flush()?;
    }

    let mut excl = create(dir, EXCLUSIONS_FILE)?;
    excl.write_record(["table", "measure", "context", "entity"])?;
    for e in &exclusions {
        excl.write_record([e.table, e.measure.id(), &e.context.join("/"), &e.entity])?;
    }
    excl.flush()?;

    let manifest = RunManifest {
        config: config.clone(),
        cells: cells.keys().cloned().collect(),
        metric_rows,
        delta_rows,
        failed_cells: failures.len(),
        excluded_contexts: exclusions.len(),
    };
    serde_json::to_writer_pretty(File::create(dir.join(RUN_FILE))?, &manifest)?;

    Ok(RunOutcome {
        out: dir.clone(),
        cells: cells.len(),
        metric_rows,
        delta_rows,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrators::CalibratorKind;
    use crate::learners::LearnerKind;
    use crate::synth::{SynthKind, SynthSpec};

    fn config(out: &Path) -> BenchConfig {
        BenchConfig {
            datasets: vec![DatasetSource::Synth {
                spec: SynthSpec::new(SynthKind::Twonorm, 60, 3, 1).unwrap(),
            }],
            learners: vec![LearnerKind::ClassPrior],
            calibrators: vec![],
            k: 2,
            out: out.to_path_buf(),
            ..BenchConfig::default()
        }
    }

    #[test]
    fn smallest_grid() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_benchmark(&config(dir.path())).unwrap();
        assert!(outcome.success());
        assert_eq!((outcome.metric_rows, outcome.delta_rows), (2, 0));
    }

    #[test]
    fn failed_cells_are_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path());
        c.datasets = vec![DatasetSource::Synth {
            spec: SynthSpec::new(SynthKind::Twonorm, 12, 2, 1).unwrap(),
        }];
        c.calibrators = vec![CalibratorKind::Platt];
        c.cal_fraction = 0.01;
        let outcome = run_benchmark(&c).unwrap();
        assert!(!outcome.success());
        assert_eq!(outcome.metric_rows, 2);
        assert_eq!(outcome.failures.len(), 2);
        let failures = fs::read_to_string(dir.path().join(FAILURES_FILE)).unwrap();
        assert_eq!(failures.lines().count(), 3);
    }
}
