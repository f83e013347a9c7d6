//! File formats: numeric CSV blocks, trajectory CSVs and atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use kalman_core::linalg::Vector;

use crate::error::{HarnessError, Result};

/// Shortest decimal that parses back to the same double.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Reads a headerless numeric CSV block into rows.
pub fn read_matrix_csv(path: &Path) -> std::result::Result<Vec<Vec<f64>>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>()
                    .map_err(|_| format!("{}: row {} column {}: not a number: {cell:?}", path.display(), i + 1, j + 1))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Column names of a trajectory file for the given dimensions.
pub fn trajectory_header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["k".to_string()];
    h.extend((0..n).map(|i| format!("x_{i}")));
    h.extend((0..m).map(|i| format!("z_{i}")));
    h
}

pub fn render_trajectory(states: &[Vector], measurements: &[Vector]) -> Vec<u8> {
    let n = states.first().map(|x| x.len()).unwrap_or(0);
    let m = measurements.first().map(|z| z.len()).unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(trajectory_header(n, m)).expect("in-memory write");
    for (k, (x, z)) in states.iter().zip(measurements).enumerate() {
        let mut rec = vec![k.to_string()];
        rec.extend(x.iter().map(|v| fmt_f64(*v)));
        rec.extend(z.iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Parsed trajectory file. `states` is empty when the file carries no state columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub states: Vec<Vector>,
    pub measurements: Vec<Vector>,
}

/// Reads a trajectory CSV, checking the header against the model dimensions.
/// State columns are optional; measurement columns are required.
pub fn read_trajectory(path: &Path, n: usize, m: usize) -> Result<TrajectoryFile> {
    let input = |msg: String| HarnessError::Input(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| input(e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| input(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let full = trajectory_header(n, m);
    let mut measurement_only = vec!["k".to_string()];
    measurement_only.extend(full[1 + n..].iter().cloned());
    let with_states = if header == full {
        true
    } else if header == measurement_only {
        false
    } else {
        return Err(input(format!(
            "dimension mismatch: header {:?} does not match model (expected {:?})",
            header.join(","),
            full.join(",")
        )));
    };

    let mut states = Vec::new();
    let mut measurements = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| input(e.to_string()))?;
        let k: usize = rec[0]
            .parse()
            .map_err(|_| input(format!("row {}: bad step index {:?}", row + 1, &rec[0])))?;
        if k != row {
            return Err(input(format!("row {}: expected step {row}, found {k}", row + 1)));
        }
        let values = rec
            .iter()
            .skip(1)
            .map(|c| c.parse::<f64>().map_err(|_| input(format!("row {}: not a number: {c:?}", row + 1))))
            .collect::<Result<Vec<f64>>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(input(format!("row {}: non-finite value", row + 1)));
        }
        let split = if with_states { n } else { 0 };
        if with_states {
            states.push(Vector::from_column_slice(&values[..split]));
        }
        measurements.push(Vector::from_column_slice(&values[split..]));
    }
    if measurements.is_empty() {
        return Err(input("no data rows".to_string()));
    }
    Ok(TrajectoryFile { states, measurements })
}

/// Writes through a temporary sibling and renames, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let tmp = tmp_path(path);
    let result = fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(HarnessError::io(path, e));
    }
    Ok(())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

pub fn to_json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable report");
    bytes.push(b'\n');
    bytes
}
