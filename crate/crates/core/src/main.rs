use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use calbench::calibrators::{fit_calibrator, CalibratorKind, CalibratorModel, DEFAULT_ALPHA};
use calbench::harness::{
    emit_report, format_float, run_benchmark, write_dataset_csv, BenchConfig, DatasetSource, IngestOptions,
};
use calbench::learners::LearnerKind;
use calbench::synth::{generate, SynthKind, SynthSpec};
use calbench::{BinaryLabeledScores, Error, Result};

#[derive(Parser)]
#[command(name = "calbench", version, about = "Post-hoc calibration benchmark for binary classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset with its known conditional probabilities.
    GenSynth(GenSynthArgs),
    /// Run the cross-validated calibration benchmark.
    Run(Box<RunArgs>),
    /// Summarize a completed run directory into summary.json.
    Report {
        run_dir: PathBuf,
    },
    /// Fit a calibrator on one score file and apply it to another.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct GenSynthArgs {
    #[arg(long)]
    kind: SynthKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Dataset CSV file (repeatable).
    #[arg(long = "data")]
    data: Vec<PathBuf>,
    /// Synthetic dataset as kind:n:d:seed (repeatable).
    #[arg(long = "synth")]
    synth: Vec<SynthSpec>,
    /// Precomputed score file of an external model, named after the file stem (repeatable).
    #[arg(long = "scores")]
    scores: Vec<PathBuf>,
    /// Target column of the dataset files.
    #[arg(long, default_value = "y")]
    target: String,
    /// Target value treated as the positive class.
    #[arg(long)]
    positive: Option<String>,
    /// Column with known P(Y = 1 | x), excluded from the features.
    #[arg(long)]
    truth_col: Option<String>,
    /// Columns to code as categorical regardless of content.
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "class_prior,logistic,gaussian_nb")]
    learners: Vec<LearnerKind>,
    #[arg(long, value_delimiter = ',', default_value = "platt,isotonic,beta,venn_abers,pearsonify")]
    calibrators: Vec<CalibratorKind>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0.2)]
    cal_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = 1e-15)]
    clip_eps: f64,
    /// Miscoverage level of the Pearson-residual band.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "calbench-out")]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    method: CalibratorKind,
    /// Calibration CSV with `score` and `label` columns.
    #[arg(long)]
    cal: PathBuf,
    /// CSV with a `score` column to calibrate.
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn gen_synth(args: GenSynthArgs) -> Result<ExitCode> {
    let spec = SynthSpec::new(args.kind, args.n, args.d, args.seed)?;
    let (table, truth) = generate(&spec)?;
    write_dataset_csv(output(args.out.as_deref())?, &table, Some(&truth))?;
    Ok(ExitCode::SUCCESS)
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let options = IngestOptions {
        target: args.target,
        positive: args.positive,
        truth_col: args.truth_col,
        categorical: args.categorical,
    };
    let mut datasets: Vec<DatasetSource> = args
        .data
        .into_iter()
        .map(|path| DatasetSource::Csv {
            path,
            options: options.clone(),
        })
        .collect();
    datasets.extend(args.synth.into_iter().map(|spec| DatasetSource::Synth { spec }));
    for path in args.scores {
        let learner_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| Error::InvalidInput(format!("cannot name score file {}", path.display())))?;
        datasets.push(DatasetSource::Scores { path, learner_id });
    }
    let config = BenchConfig {
        datasets,
        learners: args.learners,
        calibrators: args.calibrators,
        k: args.folds,
        repeats: args.repeats,
        cal_fraction: args.cal_frac,
        master_seed: args.seed,
        threshold: args.threshold,
        clip_eps: args.clip_eps,
        alpha: args.alpha,
        jobs: args.jobs,
        out: args.out,
    };
    let outcome = run_benchmark(&config)?;
    println!(
        "{} cells, {} metric rows, {} delta rows, {} failed -> {}",
        outcome.cells,
        outcome.metric_rows,
        outcome.delta_rows,
        outcome.failures.len(),
        outcome.out.display()
    );
    for (key, e) in &outcome.failures {
        eprintln!("failed {}: {e}", key.canonical());
    }
    Ok(if outcome.success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn read_scores(path: &Path, need_labels: bool) -> Result<(Vec<f64>, Option<Vec<u8>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let score = find("score").ok_or_else(|| Error::Dataset(format!("{}: no 'score' column", path.display())))?;
    let label = find("label");
    if need_labels && label.is_none() {
        return Err(Error::Dataset(format!("{}: no 'label' column", path.display())));
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str, v: &str| Error::Dataset(format!("{} row {}: bad {what} '{v}'", path.display(), i + 1));
        scores.push(rec[score].parse::<f64>().map_err(|_| bad("score", &rec[score]))?);
        if let Some(l) = label {
            labels.push(match &rec[l] {
                "0" => 0,
                "1" => 1,
                other => return Err(bad("label", other)),
            });
        }
    }
    Ok((scores, label.map(|_| labels)))
}

fn calibrate(args: CalibrateArgs) -> Result<ExitCode> {
    let (cal_scores, cal_labels) = read_scores(&args.cal, true)?;
    let cal = BinaryLabeledScores::new(cal_scores, cal_labels.unwrap_or_default())?;
    let model = fit_calibrator(args.method, &cal, args.alpha)?;
    let (scores, _) = read_scores(&args.test, false)?;
    if let Some((index, &value)) = scores.iter().enumerate().find(|(_, s)| !s.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    match &model {
        CalibratorModel::VennAbers(m) => {
            w.write_record(["score", "calibrated", "p0", "p1"])?;
            for (s, p) in scores.iter().zip(m.predict_many(&scores)) {
                w.write_record([s, &p.point, &p.p0, &p.p1].map(|&v| format_float(v)))?;
            }
        }
        CalibratorModel::Pearsonify(m) => {
            w.write_record(["score", "calibrated", "lo", "hi"])?;
            for &s in &scores {
                let b = m.apply(s);
                w.write_record([s, b.point, b.lo, b.hi].map(format_float))?;
            }
        }
        _ => {
            w.write_record(["score", "calibrated"])?;
            for (&s, c) in scores.iter().zip(model.apply_many(&scores)) {
                w.write_record([s, c].map(format_float))?;
            }
        }
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenSynth(args) => gen_synth(args),
        Command::Run(args) => run(*args),
        Command::Report { run_dir } => emit_report(&run_dir).map(|_| {
            println!("{}", run_dir.join(calbench::harness::report::SUMMARY_FILE).display());
            ExitCode::SUCCESS
        }),
        Command::Calibrate(args) => calibrate(args),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
