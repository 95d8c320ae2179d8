//! Benchmark driver: dataset ingestion, grid execution and report files.

pub mod config;
pub mod ingest;
pub mod report;
pub mod run;

pub use config::{BenchConfig, DatasetSource};
pub use ingest::{ingest_dataset, read_score_file, write_dataset_csv, IngestOptions};
pub use report::{emit_report, summarize_changes, ChangeSummary};
pub use run::{run_benchmark, RunOutcome};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub(crate) fn parse_opt(field: &str) -> crate::Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| crate::Error::Dataset(format!("'{field}' is not a number")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn floats_round_trip(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let back = parse_opt(&format_float(v)).unwrap().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn undefined_is_empty() {
        assert_eq!(format_opt(None), "");
        assert_eq!(parse_opt("").unwrap(), None);
    }
}
