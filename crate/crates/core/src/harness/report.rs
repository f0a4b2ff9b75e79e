use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{config, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(config(format!("unknown format {other:?} (expected csv or json)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSummary {
    pub k: usize,
    /// Updates per run (oracle calls for single-call methods).
    pub steps: usize,
    pub quantile: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub fail_freq: Option<f64>,
    pub leftball_freq: f64,
    pub n: usize,
    /// The schedule's deterministic guarantee at this horizon, when it has one.
    pub guarantee: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedK {
    pub k: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileReport {
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_time_s: f64,
    pub quantile_level: f64,
    pub rows: Vec<KSummary>,
    pub skipped: Vec<SkippedK>,
}

pub const CSV_HEADER: [&str; 7] = ["K", "quantile", "ci_lo", "ci_hi", "fail_freq", "leftball_freq", "n"];

fn csv_err(e: csv::Error) -> Error {
    Error::Numerical(format!("csv write failed: {e}"))
}

impl QuantileReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(CSV_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            wr.write_record([
                r.k.to_string(),
                format!("{:e}", r.quantile),
                format!("{:e}", r.ci_lo),
                format!("{:e}", r.ci_hi),
                r.fail_freq.map(|f| f.to_string()).unwrap_or_default(),
                r.leftball_freq.to_string(),
                r.n.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::Numerical(format!("csv flush failed: {e}")))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Writes any serializable report as pretty JSON, or via `csv` for CSV.
pub fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_report(report: &QuantileReport, format: Format, path: &Path) -> Result<()> {
    let bytes = match format {
        Format::Json => report.to_json()?.into_bytes(),
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            buf
        }
    };
    write_output(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::trials::{run_trials, tests_support::sample_config};
    use crate::noise::NoiseModel;

    #[test]
    fn empty_rows_give_header_only() {
        let mut rep = run_trials(&sample_config(NoiseModel::none(), vec![], 1), None).unwrap();
        rep.rows.clear();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "K,quantile,ci_lo,ci_hi,fail_freq,leftball_freq,n\n");
    }

    #[test]
    fn csv_row_count_and_json_round_trip() {
        let cfg = sample_config(NoiseModel::heavy_tail(1.0, 1.5, None).unwrap(), vec![10, 20, 40], 5);
        let rep = run_trials(&cfg, None).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
        let back = QuantileReport::from_json(&rep.to_json().unwrap()).unwrap();
        assert_eq!(back, rep);
    }

    #[test]
    fn io_errors_carry_the_path() {
        let rep = run_trials(&sample_config(NoiseModel::none(), vec![], 1), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        let err = emit_report(&rep, Format::Csv, &blocker.join("out.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("file"));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
        assert!("xml".parse::<Format>().is_err());
    }
}
