//! CSV persistence and the JSON metadata sidecar.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Result, SwanError};

use super::harness::{DesignRecord, ResultRow, ResultTable, SkippedPair};
use super::spec::ExperimentSpec;

/// Exact CSV header.
pub const CSV_HEADER: &str =
    "experiment,detector,M,T,P_dB,trials,block_err,seg_err,missed_rate,false_alarm_rate,mean_runtime_us";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SwanError + '_ {
    move |source| SwanError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> SwanError + '_ {
    move |source| SwanError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Appends `table` to the CSV at `path`.
///
/// A missing or empty file gets the header first; an existing file must
/// already start with the exact header.
pub fn write_results(table: &ResultTable, path: &Path) -> Result<()> {
    let existing = match File::open(path) {
        Ok(f) => {
            let mut first = String::new();
            BufReader::new(f)
                .read_line(&mut first)
                .map_err(io_err(path))?;
            Some(first.trim_end().to_string())
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(io_err(path)(e)),
    };
    let needs_header = match existing.as_deref() {
        None | Some("") => true,
        Some(CSV_HEADER) => false,
        Some(other) => {
            return Err(SwanError::InvalidConfig(format!(
                "{} has an unexpected header `{other}`",
                path.display()
            )))
        }
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    if needs_header {
        writer
            .write_record(CSV_HEADER.split(','))
            .map_err(csv_err(path))?;
    }
    for row in &table.rows {
        writer.serialize(row).map_err(csv_err(path))?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads a results CSV, checking the header exactly.
pub fn read_results(path: &Path) -> Result<ResultTable> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(SwanError::InvalidConfig(format!(
            "{} has an unexpected header `{header}`",
            path.display()
        )));
    }
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()
        .map_err(csv_err(path))?;
    Ok(ResultTable { rows })
}

/// One run's entry in the sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata<'a> {
    pub experiment: &'a str,
    pub version: &'static str,
    pub seed: u64,
    pub trials: usize,
    pub parallelism: usize,
    /// The resolved experiment in config-file form.
    pub config: String,
    pub spec: &'a ExperimentSpec,
    pub designs: &'a [DesignRecord],
    pub skipped: &'a [SkippedPair],
    /// Values chosen by this implementation rather than taken from a
    /// measured system.
    pub artifact_choices: Vec<String>,
}

/// `<path>.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Appends `meta` to the JSON array in the sidecar next to `csv_path`.
pub fn write_metadata(meta: &RunMetadata<'_>, csv_path: &Path) -> Result<PathBuf> {
    let path = sidecar_path(csv_path);
    let mut runs: Vec<serde_json::Value> = match std::fs::read_to_string(&path) {
        Ok(text) if !text.trim().is_empty() => {
            serde_json::from_str(&text).map_err(|e| SwanError::Parse {
                line: e.line(),
                msg: format!("{}: {e}", path.display()),
            })?
        }
        Ok(_) => Vec::new(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(io_err(&path)(e)),
    };
    runs.push(serde_json::to_value(meta).expect("metadata is serializable"));
    let mut file = File::create(&path).map_err(io_err(&path))?;
    let text = serde_json::to_string_pretty(&runs).expect("metadata is serializable");
    file.write_all(text.as_bytes()).map_err(io_err(&path))?;
    file.write_all(b"\n").map_err(io_err(&path))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(detector: &str, p: f64) -> ResultRow {
        ResultRow {
            experiment: "x".into(),
            detector: detector.into(),
            m: 13,
            t: 16,
            power_db: p,
            trials: 10_000,
            block_err: 0.1234,
            seg_err: 1.0 / 3.0,
            missed_rate: 0.1,
            false_alarm_rate: 0.2,
            mean_runtime_us: 3.5,
        }
    }

    #[test]
    fn empty_table_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_results(&ResultTable::default(), &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            format!("{CSV_HEADER}\n")
        );
    }

    #[test]
    fn round_trip_and_append() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/r.csv");
        let a = ResultTable {
            rows: vec![row("joint-ml", -25.0), row("lasso", -30.5)],
        };
        write_results(&a, &path).unwrap();
        assert_eq!(read_results(&path).unwrap(), a);
        let b = ResultTable {
            rows: vec![row("map-oracle", -15.0)],
        };
        write_results(&b, &path).unwrap();
        let back = read_results(&path).unwrap();
        assert_eq!(back.rows.len(), 3);
        assert_eq!(back.rows[2], b.rows[0]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("experiment,").count(), 1);
    }

    #[test]
    fn foreign_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        assert!(write_results(&ResultTable::default(), &path).is_err());
        assert!(read_results(&path).is_err());
    }

    #[test]
    fn missing_file_error_names_path() {
        let err = read_results(Path::new("/nonexistent/r.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/r.csv"), "{err}");
    }

    #[test]
    fn sidecar_accumulates_runs() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("r.csv");
        let spec = ExperimentSpec::default();
        let meta = RunMetadata {
            experiment: "x",
            version: "0",
            seed: 1,
            trials: 1,
            parallelism: 1,
            config: spec.to_config_string(),
            spec: &spec,
            designs: &[],
            skipped: &[],
            artifact_choices: vec![],
        };
        let p = write_metadata(&meta, &csv).unwrap();
        write_metadata(&meta, &csv).unwrap();
        assert!(p.to_string_lossy().ends_with("r.csv.meta.json"));
        let v: Vec<serde_json::Value> =
            serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0]["seed"], 1);
    }
}
