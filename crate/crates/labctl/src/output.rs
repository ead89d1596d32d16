//! Report emission: atomic writes, JSON with a schema version, RFC 4180 CSV.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::LabError;

pub const SCHEMA_VERSION: u32 = 1;

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LabError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| LabError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Serializes `value` and puts `schema_version` first when it is an object.
pub fn versioned<T: Serialize>(value: &T) -> Result<Value, LabError> {
    let v = serde_json::to_value(value)?;
    Ok(match v {
        Value::Object(map) => {
            let mut out = serde_json::Map::new();
            out.insert("schema_version".into(), SCHEMA_VERSION.into());
            out.extend(map);
            Value::Object(out)
        }
        other => serde_json::json!({ "schema_version": SCHEMA_VERSION, "data": other }),
    })
}

pub fn json_string<T: Serialize>(value: &T) -> Result<String, LabError> {
    let mut s = serde_json::to_string_pretty(&versioned(value)?)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), LabError> {
    write_atomic(path, json_string(value)?.as_bytes())
}

/// A plain table of strings, emitted as CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table { headers: headers.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, LabError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| LabError::Io(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), LabError> {
        write_atomic(path, &self.to_csv()?)
    }
}

/// Row helper: anything displayable.
#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($x.to_string()),*] };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_only_when_needed() {
        let mut t = Table::new(&["a", "b"]);
        t.push(row!["x,y", "plain"]);
        t.push(row!["say \"hi\"", 3]);
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "a,b\n\"x,y\",plain\n\"say \"\"hi\"\"\",3\n");
    }

    #[test]
    fn json_reports_lead_with_the_schema_version() {
        let s = json_string(&serde_json::json!({ "a": 1, "z": 2 })).unwrap();
        assert!(s.starts_with("{\n  \"schema_version\": 1,"), "{s}");
        let wrapped = versioned(&vec![1, 2]).unwrap();
        assert_eq!(wrapped["data"], serde_json::json!([1, 2]));
    }

    #[test]
    fn atomic_write_replaces_the_target() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
