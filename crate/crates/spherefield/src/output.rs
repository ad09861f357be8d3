//! Result persistence: atomic JSON documents and plain CSV tables.
//!
//! Every file is first written to a temporary sibling and then renamed into
//! place, so readers never observe a half-written document and an aborted
//! run leaves no corrupt outputs. Numbers are serialized in Rust's shortest
//! round-trip form, which makes outputs byte-identical across repeated runs
//! of the same `(config, seed)`.

use std::fs;
use std::path::Path;
use std::process;

use serde::Serialize;

use crate::error::Result;
use crate::experiments::RawTable;

/// Write `value` as pretty-printed JSON, atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Write a raw table as CSV with a header row, atomically.
pub fn write_csv(path: &Path, table: &RawTable) -> Result<()> {
    let mut text = table.columns.join(",");
    for row in &table.rows {
        text.push('\n');
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                text.push(',');
            }
            text.push_str(&v.to_string());
        }
    }
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Write bytes to a temporary sibling of `path` and rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| crate::error::Error::Config(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(format!(".{}.tmp", process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    match fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(err) => {
            let _ = fs::remove_file(&tmp);
            Err(err.into())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_shortest_float_form() {
        let dir = tempfile::tempdir().unwrap();
        let mut table = RawTable::new("t", &["r", "value"]);
        table.push(vec![0.02, 2.97e-6]);
        table.push(vec![0.01, f64::NAN]);
        let path = dir.path().join("t.csv");
        write_csv(&path, &table).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("r,value"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0].parse::<f64>().unwrap(), 0.02);
        assert_eq!(row[1].parse::<f64>().unwrap(), 2.97e-6);
        assert!(lines.next().unwrap().contains("NaN"));
        assert!(!dir.path().join(format!("t.csv.{}.tmp", process::id())).exists());
    }

    #[test]
    fn json_write_is_atomic_and_repeatable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("doc.json");
        let value = serde_json::json!({"b": 2, "a": [1.5, 0.25]});
        write_json(&path, &value).unwrap();
        let first = fs::read(&path).unwrap();
        write_json(&path, &value).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());
        assert!(first.ends_with(b"\n"));
    }
}
