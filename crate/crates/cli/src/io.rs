//! CSV ingestion, label files and atomic output writes.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use ofmfa::Dataset;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderMode {
    /// Treat the first row as a header if any of its fields is not a number.
    #[default]
    Auto,
    Yes,
    No,
}

fn parse_number(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn is_missing(field: &str) -> bool {
    matches!(field.trim(), "" | "NA" | "na" | "NaN" | "nan" | "null" | "?")
}

fn read_records(path: &Path) -> CliResult<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io("ingest", path, e))?;
    reader
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::data("ingest", format!("{}: {e}", path.display())))
}

/// Reads a comma-separated numeric table and standardizes every column.
pub fn ingest(path: &Path, header: HeaderMode) -> CliResult<Dataset> {
    let mut records = read_records(path)?;
    if records.is_empty() {
        return Err(CliError::data("ingest", format!("{} is empty", path.display())));
    }
    let has_header = match header {
        HeaderMode::Yes => true,
        HeaderMode::No => false,
        HeaderMode::Auto => records[0].iter().any(|f| parse_number(f).is_none() && !is_missing(f)),
    };
    let names: Option<Vec<String>> = has_header.then(|| records.remove(0).iter().map(str::to_string).collect());
    let n = records.len();
    let p = names.as_ref().map_or_else(|| records.first().map_or(0, |r| r.len()), |v| v.len());
    let first_row = if has_header { 2 } else { 1 };
    let mut values = Vec::with_capacity(n * p);
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != p {
            return Err(CliError::data(
                "ingest",
                format!("row {} has {} fields, expected {p}", i + first_row, rec.len()),
            ));
        }
        for (j, field) in rec.iter().enumerate() {
            if is_missing(field) {
                return Err(CliError::data(
                    "ingest",
                    format!("missing value at row {}, column {} (missing data is not supported)", i + first_row, j + 1),
                ));
            }
            let v = parse_number(field).ok_or_else(|| {
                CliError::data("ingest", format!("cannot parse '{field}' at row {}, column {}", i + first_row, j + 1))
            })?;
            values.push(v);
        }
    }
    Dataset::standardize(&values, n, p, names).map_err(|e| CliError::from_core("ingest", e))
}

/// Reads cluster labels, mapped to dense ids in order of first appearance.
///
/// A `.json` file must hold a `true_z` array. A CSV file uses `column` if
/// given, otherwise the first of `z_map`, `label`, `true_z` present in the
/// header, otherwise its first column. The header is detected from the
/// first row: it is a header unless every field is an integer.
pub fn read_labels(path: &Path, column: Option<&str>) -> CliResult<Vec<usize>> {
    let raw: Vec<String> = if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io("labels", path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::data("labels", format!("{}: {e}", path.display())))?;
        let arr = value
            .get("true_z")
            .and_then(|v| v.as_array())
            .ok_or_else(|| CliError::data("labels", format!("{} has no `true_z` array", path.display())))?;
        arr.iter().map(|v| v.to_string()).collect()
    } else {
        let mut records = read_records(path).map_err(|e| match e {
            CliError::Data { message, .. } => CliError::data("labels", message),
            other => other,
        })?;
        if records.is_empty() {
            return Err(CliError::data("labels", format!("{} is empty", path.display())));
        }
        let header = records[0].iter().any(|f| f.parse::<i64>().is_err());
        let idx = if header {
            let names: Vec<&str> = records[0].iter().collect();
            let wanted: Vec<&str> = match column {
                Some(c) => vec![c],
                None => vec!["z_map", "label", "true_z"],
            };
            match wanted.iter().find_map(|w| names.iter().position(|n| n == w)) {
                Some(i) => i,
                None if column.is_some() => {
                    return Err(CliError::usage("labels", format!("{} has no column '{}'", path.display(), column.unwrap())))
                }
                None => 0,
            }
        } else {
            0
        };
        if header {
            records.remove(0);
        }
        records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.get(idx).map(str::to_string).ok_or_else(|| {
                    CliError::data("labels", format!("{}: row {} has no column {}", path.display(), i + 1, idx + 1))
                })
            })
            .collect::<CliResult<_>>()?
    };
    let mut ids: HashMap<String, usize> = HashMap::new();
    Ok(raw
        .into_iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l).or_insert(next)
        })
        .collect())
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so the file is either complete or absent.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io("output", path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io("output", path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io("output", path, e))?;
    tmp.persist(path).map_err(|e| CliError::io("output", path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io("output", path, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Renders rows as CSV in memory.
pub fn csv_bytes<I, R>(header: &[String], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io("output", path, e))
}
