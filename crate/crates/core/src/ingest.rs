//! Signal-log loading and scenario segmentation.
//!
//! A log is described by a JSON [`LogManifest`] which points at a CSV signal
//! table. The first CSV column is `timestamp` (epoch seconds); every other
//! column is one signal. [`segment`] tiles the log into equal windows
//! starting at the first timestamp.

use std::collections::HashMap;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_WINDOW_S: f64 = 30.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("malformed manifest {path}: {reason}")]
    MalformedManifest { path: PathBuf, reason: String },
    #[error("malformed signals file {path}: {reason}")]
    MalformedSignals { path: PathBuf, reason: String },
    #[error("{path}: line {line}: timestamp {value} does not increase on {previous}")]
    NonMonotonicTimestamps {
        path: PathBuf,
        line: u64,
        previous: f64,
        value: f64,
    },
    #[error("{path}: line {line}: expected {expected} cells, found {found}")]
    RaggedColumns {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{path}: line {line}, column {column:?}: non-numeric cell {cell:?}")]
    NonNumericCell {
        path: PathBuf,
        line: u64,
        column: String,
        cell: String,
    },
    #[error("{path}: duplicate column {column:?}")]
    DuplicateColumn { path: PathBuf, column: String },
    #[error("log {0} has no rows")]
    EmptyLog(String),
    #[error("window length must be positive and finite, got {0}")]
    InvalidWindow(f64),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Provenance for one test drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogManifest {
    pub vehicle: String,
    pub log_id: String,
    pub utc_start: DateTime<Utc>,
    pub utc_end: DateTime<Utc>,
    pub signals_file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_dir: Option<PathBuf>,
    pub link_template: String,
}

impl LogManifest {
    fn validate(&self) -> Result<(), String> {
        if self.vehicle.trim().is_empty() {
            return Err("vehicle is empty".into());
        }
        if self.log_id.trim().is_empty() {
            return Err("log_id is empty".into());
        }
        if self.utc_start >= self.utc_end {
            return Err(format!(
                "utc_start {} is not before utc_end {}",
                self.utc_start, self.utc_end
            ));
        }
        Ok(())
    }

    pub fn link_for(&self, scenario_id: &str) -> String {
        self.link_template.replace("{scenario_id}", scenario_id)
    }
}

/// Read-only access to named signal columns over some row range.
pub trait SignalSource {
    fn signal(&self, name: &str) -> Option<&[f64]>;
    fn rows(&self) -> usize;
}

/// One drive's columnar signal table.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalLog {
    pub manifest: LogManifest,
    timestamps: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    by_name: HashMap<String, usize>,
}

impl SignalLog {
    /// Builds a log from in-memory columns, checking the table invariants.
    pub fn new(
        manifest: LogManifest,
        timestamps: Vec<f64>,
        columns: IndexMap<String, Vec<f64>>,
    ) -> Result<Self, IngestError> {
        let origin = manifest.signals_file.clone();
        manifest
            .validate()
            .map_err(|reason| IngestError::MalformedManifest {
                path: origin.clone(),
                reason,
            })?;
        check_monotonic(&origin, &timestamps, |i| i as u64 + 2)?;
        let mut names = Vec::with_capacity(columns.len());
        let mut cols = Vec::with_capacity(columns.len());
        let mut by_name = HashMap::with_capacity(columns.len());
        for (name, values) in columns {
            if values.len() != timestamps.len() {
                return Err(IngestError::RaggedColumns {
                    path: origin,
                    line: 0,
                    expected: timestamps.len(),
                    found: values.len(),
                });
            }
            by_name.insert(name.clone(), names.len());
            names.push(name);
            cols.push(values);
        }
        Ok(Self {
            manifest,
            timestamps,
            names,
            columns: cols,
            by_name,
        })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn signal_names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.by_name.get(name).map(|&i| self.columns[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn window(&self, rows: Range<usize>) -> LogWindow<'_> {
        LogWindow { log: self, rows }
    }

    /// Self-contained copy of a scenario's rows, suitable for writing to disk.
    pub fn scenario_file(&self, scenario: &Scenario) -> ScenarioFile {
        let rows = scenario.signal_slice.clone();
        let signals = self
            .names
            .iter()
            .zip(&self.columns)
            .map(|(n, c)| (n.clone(), c[rows.clone()].to_vec()))
            .collect();
        ScenarioFile {
            scenario: scenario.clone(),
            timestamps: self.timestamps[rows].to_vec(),
            signals,
        }
    }
}

/// A borrowed row range of a [`SignalLog`].
pub struct LogWindow<'a> {
    log: &'a SignalLog,
    rows: Range<usize>,
}

impl SignalSource for LogWindow<'_> {
    fn signal(&self, name: &str) -> Option<&[f64]> {
        self.log.column(name).map(|c| &c[self.rows.clone()])
    }

    fn rows(&self) -> usize {
        self.rows.len()
    }
}

/// A fixed-length window of one log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_id: String,
    pub vehicle: String,
    pub log_id: String,
    pub index: usize,
    pub window_start: f64,
    pub window_end: f64,
    pub signal_slice: Range<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_ref: Option<PathBuf>,
    pub link: String,
}

/// On-disk form of a scenario: its metadata plus the sliced signal rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub timestamps: Vec<f64>,
    pub signals: IndexMap<String, Vec<f64>>,
}

impl ScenarioFile {
    pub fn read(path: &Path) -> Result<Self, IngestError> {
        let bytes = read_file(path)?;
        serde_json::from_slice(&bytes).map_err(|e| IngestError::MalformedSignals {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

impl SignalSource for ScenarioFile {
    fn signal(&self, name: &str) -> Option<&[f64]> {
        self.signals.get(name).map(Vec::as_slice)
    }

    fn rows(&self) -> usize {
        self.timestamps.len()
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, IngestError> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IngestError::MissingFile(path.to_path_buf()),
        _ => IngestError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })
}

fn check_monotonic(
    path: &Path,
    timestamps: &[f64],
    line_of: impl Fn(usize) -> u64,
) -> Result<(), IngestError> {
    for (i, pair) in timestamps.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(IngestError::NonMonotonicTimestamps {
                path: path.to_path_buf(),
                line: line_of(i + 1),
                previous: pair[0],
                value: pair[1],
            });
        }
    }
    Ok(())
}

/// Reads a manifest; relative paths inside it resolve against the
/// manifest's directory.
pub fn load_manifest(manifest_path: &Path) -> Result<LogManifest, IngestError> {
    let bytes = read_file(manifest_path)?;
    let malformed = |reason: String| IngestError::MalformedManifest {
        path: manifest_path.to_path_buf(),
        reason,
    };
    let mut manifest: LogManifest =
        serde_json::from_slice(&bytes).map_err(|e| malformed(e.to_string()))?;
    manifest.validate().map_err(malformed)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new(""));
    manifest.signals_file = base.join(&manifest.signals_file);
    manifest.frames_dir = manifest.frames_dir.map(|d| base.join(d));
    Ok(manifest)
}

pub fn load_log(manifest_path: &Path) -> Result<SignalLog, IngestError> {
    let manifest = load_manifest(manifest_path)?;
    let path = manifest.signals_file.clone();
    let bytes = read_file(&path)?;
    let (timestamps, names, columns) = parse_signals(&path, &bytes)?;
    let by_name = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    Ok(SignalLog {
        manifest,
        timestamps,
        names,
        columns,
        by_name,
    })
}

type Parsed = (Vec<f64>, Vec<String>, Vec<Vec<f64>>);

fn parse_signals(path: &Path, bytes: &[u8]) -> Result<Parsed, IngestError> {
    let malformed = |reason: String| IngestError::MalformedSignals {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    match header.get(0) {
        Some("timestamp") => {}
        other => {
            return Err(malformed(format!(
                "first column must be \"timestamp\", found {other:?}"
            )))
        }
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut seen = std::collections::HashSet::with_capacity(names.len());
    for n in &names {
        if !seen.insert(n.as_str()) {
            return Err(IngestError::DuplicateColumn {
                path: path.to_path_buf(),
                column: n.clone(),
            });
        }
    }

    let mut timestamps = Vec::new();
    let mut lines = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(malformed(e.to_string())),
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(IngestError::RaggedColumns {
                path: path.to_path_buf(),
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let value = parse_cell(cell).ok_or_else(|| IngestError::NonNumericCell {
                path: path.to_path_buf(),
                line,
                column: header[j].to_owned(),
                cell: cell.to_owned(),
            })?;
            if j == 0 {
                timestamps.push(value);
            } else {
                columns[j - 1].push(value);
            }
        }
        lines.push(line);
    }
    check_monotonic(path, &timestamps, |i| lines[i])?;
    Ok((timestamps, names, columns))
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Cuts a log into back-to-back windows of `window_s` seconds.
///
/// The covered span runs from the first timestamp to one sample period past
/// the last one; a trailing window shorter than `window_s` is dropped.
pub fn segment(log: &SignalLog, window_s: f64) -> Result<Vec<Scenario>, IngestError> {
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(IngestError::InvalidWindow(window_s));
    }
    let ts = log.timestamps();
    let (first, last) = match (ts.first(), ts.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(IngestError::EmptyLog(log.manifest.log_id.clone())),
    };
    let period = match ts.len() {
        0 | 1 => 0.0,
        n => ts[n - 1] - ts[n - 2],
    };
    let coverage = last + period - first;
    let count = window_count(coverage, window_s);

    let manifest = &log.manifest;
    let mut scenarios = Vec::with_capacity(count);
    for index in 0..count {
        let window_start = first + index as f64 * window_s;
        let window_end = first + (index + 1) as f64 * window_s;
        let lo = ts.partition_point(|&t| t < window_start);
        let hi = ts.partition_point(|&t| t < window_end);
        let scenario_id = format!("{}#{}", manifest.log_id, index);
        let frame_ref = manifest
            .frames_dir
            .as_ref()
            .map(|dir| dir.join(format!("{scenario_id}.jpg")))
            .filter(|p| p.is_file());
        scenarios.push(Scenario {
            link: manifest.link_for(&scenario_id),
            scenario_id,
            vehicle: manifest.vehicle.clone(),
            log_id: manifest.log_id.clone(),
            index,
            window_start,
            window_end,
            signal_slice: lo..hi,
            frame_ref,
        });
    }
    Ok(scenarios)
}

fn window_count(coverage: f64, window_s: f64) -> usize {
    if coverage <= 0.0 {
        return 0;
    }
    // Tolerate float noise so a 300 s span at 0.1 s sampling yields 10 windows.
    (coverage / window_s + 1e-9).floor() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn manifest(dir: &Path, csv: &str) -> PathBuf {
        fs::write(dir.join("signals.csv"), csv).unwrap();
        let m = serde_json::json!({
            "vehicle": "V1",
            "log_id": "log-a",
            "utc_start": "2024-03-01T10:00:00Z",
            "utc_end": "2024-03-01T11:00:00Z",
            "signals_file": "signals.csv",
            "frames_dir": "frames",
            "link_template": "https://viz.example/{scenario_id}"
        });
        let path = dir.join("manifest.json");
        fs::write(&path, m.to_string()).unwrap();
        path
    }

    fn synthetic(duration_s: usize, hz: usize) -> SignalLog {
        let n = duration_s * hz;
        let ts: Vec<f64> = (0..n).map(|i| 1000.0 + i as f64 / hz as f64).collect();
        let mut cols = IndexMap::new();
        cols.insert("v".to_string(), (0..n).map(|i| i as f64).collect());
        SignalLog::new(test_manifest(), ts, cols).unwrap()
    }

    pub(crate) fn test_manifest() -> LogManifest {
        LogManifest {
            vehicle: "V1".into(),
            log_id: "log-a".into(),
            utc_start: "2024-03-01T10:00:00Z".parse().unwrap(),
            utc_end: "2024-03-01T11:00:00Z".parse().unwrap(),
            signals_file: "signals.csv".into(),
            frames_dir: None,
            link_template: "viz://{scenario_id}".into(),
        }
    }

    #[test]
    fn loads_minimal_log() {
        let dir = tempfile::tempdir().unwrap();
        let path = manifest(
            dir.path(),
            "timestamp,\"vehicle/speed\",\"lka/side\"\n1.0,14.5,0\n2.0,15.0,1\n",
        );
        let log = load_log(&path).unwrap();
        assert_eq!(log.timestamps(), &[1.0, 2.0]);
        assert_eq!(log.signal_names(), &["vehicle/speed", "lka/side"]);
        assert_eq!(log.column("lka/side").unwrap(), &[0.0, 1.0]);
        assert_eq!(log.manifest.signals_file, dir.path().join("signals.csv"));
    }

    #[test]
    fn decreasing_timestamps_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = manifest(dir.path(), "timestamp,a\n10.0,1\n9.0,2\n");
        match load_log(&path) {
            Err(IngestError::NonMonotonicTimestamps { line, value, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(value, 9.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_and_non_numeric_rows_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = manifest(dir.path(), "timestamp,a,b\n1,1,2\n2,3\n");
        assert!(matches!(
            load_log(&path),
            Err(IngestError::RaggedColumns { line: 3, expected: 3, found: 2, .. })
        ));
        let path = manifest(dir.path(), "timestamp,a\n1,1\n2,snow\n");
        match load_log(&path) {
            Err(IngestError::NonNumericCell { line, column, cell, .. }) => {
                assert_eq!((line, column.as_str(), cell.as_str()), (3, "a", "snow"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn manifest_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_log(&dir.path().join("nope.json")),
            Err(IngestError::MissingFile(_))
        ));

        let path = dir.path().join("m.json");
        let mut f = fs::File::create(&path).unwrap();
        write!(
            f,
            r#"{{"vehicle":"V","log_id":"l","utc_start":"2024-01-01T00:00:00Z","utc_end":"2024-01-01T01:00:00Z","signals_file":"s.csv","link_template":"x","colour":"red"}}"#
        )
        .unwrap();
        assert!(matches!(
            load_log(&path),
            Err(IngestError::MalformedManifest { .. })
        ));

        fs::write(
            &path,
            r#"{"vehicle":"V","log_id":"l","utc_start":"2024-01-01T02:00:00Z","utc_end":"2024-01-01T01:00:00Z","signals_file":"s.csv","link_template":"x"}"#,
        )
        .unwrap();
        assert!(matches!(
            load_log(&path),
            Err(IngestError::MalformedManifest { .. })
        ));

        fs::write(
            &path,
            r#"{"vehicle":"V","log_id":"l","utc_start":"2024-01-01T00:00:00Z","utc_end":"2024-01-01T01:00:00Z","signals_file":"s.csv","link_template":"x"}"#,
        )
        .unwrap();
        assert!(matches!(load_log(&path), Err(IngestError::MissingFile(_))));
    }

    #[test]
    fn duplicate_columns_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = manifest(dir.path(), "timestamp,a,a\n1,1,2\n");
        assert!(matches!(
            load_log(&path),
            Err(IngestError::DuplicateColumn { .. })
        ));
    }

    #[test]
    fn segment_drops_trailing_partial_window() {
        let log = synthetic(95, 1);
        let scenarios = segment(&log, 30.0).unwrap();
        assert_eq!(scenarios.len(), 3);
        let bounds: Vec<_> = scenarios
            .iter()
            .map(|s| (s.window_start - 1000.0, s.window_end - 1000.0))
            .collect();
        assert_eq!(bounds, vec![(0.0, 30.0), (30.0, 60.0), (60.0, 90.0)]);
        assert_eq!(scenarios[1].signal_slice, 30..60);
        assert_eq!(scenarios[2].scenario_id, "log-a#2");
        assert_eq!(scenarios[2].link, "viz://log-a#2");
    }

    #[test]
    fn thirty_second_log_is_one_scenario() {
        assert_eq!(segment(&synthetic(30, 1), 30.0).unwrap().len(), 1);
        assert_eq!(segment(&synthetic(30, 10), 30.0).unwrap().len(), 1);
    }

    #[test]
    fn eight_five_minute_logs_make_eighty_scenarios() {
        let total: usize = (0..8)
            .map(|_| segment(&synthetic(300, 10), 30.0).unwrap().len())
            .sum();
        assert_eq!(total, 80);
    }

    #[test]
    fn segment_errors() {
        let empty = SignalLog::new(test_manifest(), vec![], IndexMap::new()).unwrap();
        assert!(matches!(segment(&empty, 30.0), Err(IngestError::EmptyLog(_))));
        let log = synthetic(60, 1);
        assert!(matches!(segment(&log, 0.0), Err(IngestError::InvalidWindow(_))));
        assert!(matches!(segment(&log, -5.0), Err(IngestError::InvalidWindow(_))));
    }

    #[test]
    fn frame_ref_only_when_file_exists() {
        let dir = tempfile::tempdir().unwrap();
        let ts: String = (0..60).map(|i| format!("{i},0\n")).collect();
        let path = manifest(dir.path(), &format!("timestamp,a\n{ts}"));
        fs::create_dir(dir.path().join("frames")).unwrap();
        fs::write(dir.path().join("frames/log-a#1.jpg"), b"jpg").unwrap();
        let log = load_log(&path).unwrap();
        let s = segment(&log, 30.0).unwrap();
        assert_eq!(s[0].frame_ref, None);
        assert_eq!(
            s[1].frame_ref.as_deref(),
            Some(dir.path().join("frames/log-a#1.jpg").as_path())
        );
    }

    #[test]
    fn scenario_file_round_trips_through_json() {
        let log = synthetic(60, 2);
        let s = &segment(&log, 30.0).unwrap()[1];
        let file = log.scenario_file(s);
        assert_eq!(file.rows(), 60);
        assert_eq!(file.signal("v").unwrap()[0], 60.0);
        let back: ScenarioFile =
            serde_json::from_str(&serde_json::to_string(&file).unwrap()).unwrap();
        assert_eq!(back, file);
    }
}
