//! Append-only run log: one JSON object per line, each headed by a
//! `schema_version` field.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

use super::types::RunRecord;
use super::validate::{validate_record, Violation};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: empty input")]
    Empty { line: usize },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: field `{field}`: {message}")]
    Field {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: unsupported schema_version {found}")]
    SchemaVersion { line: usize, found: String },
    #[error("line {line}: record violates invariants: {}", join(.violations))]
    Invalid {
        line: usize,
        violations: Vec<Violation>,
    },
    #[error("run log {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("encoding failed: {0}")]
    Encode(#[from] serde_json::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// Encodes one record as a single line (no trailing newline).
pub fn serialize_run(record: &RunRecord) -> Result<String, LogError> {
    let mut body = serde_json::to_value(record)?;
    let Value::Object(fields) = &mut body else {
        unreachable!("RunRecord serializes to an object");
    };
    let mut out = serde_json::Map::new();
    out.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    out.append(fields);
    Ok(serde_json::to_string(&Value::Object(out))?)
}

/// Decodes one log line. `line` is the 1-based position used in errors.
pub fn deserialize_run(input: &str, line: usize) -> Result<RunRecord, LogError> {
    if input.trim().is_empty() {
        return Err(LogError::Empty { line });
    }
    let mut value: Value = serde_json::from_str(input).map_err(|e| LogError::Syntax {
        line,
        message: e.to_string(),
    })?;
    let Value::Object(fields) = &mut value else {
        return Err(LogError::Syntax {
            line,
            message: "expected a JSON object".into(),
        });
    };
    match fields.remove("schema_version") {
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(LogError::SchemaVersion {
                line,
                found: v.to_string(),
            })
        }
        None => {
            return Err(LogError::Field {
                line,
                field: "schema_version".into(),
                message: "missing".into(),
            })
        }
    }
    serde_path_to_error::deserialize(value).map_err(|e| LogError::Field {
        line,
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Decodes a whole byte stream of log lines. An empty stream is an error.
pub fn deserialize_log(bytes: &[u8]) -> Result<Vec<RunRecord>, LogError> {
    let text = std::str::from_utf8(bytes).map_err(|e| LogError::Syntax {
        line: 1,
        message: e.to_string(),
    })?;
    let mut records = Vec::new();
    for (i, l) in text.lines().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let record = deserialize_run(l, i + 1)?;
        validate_record(&record).map_err(|violations| LogError::Invalid {
            line: i + 1,
            violations,
        })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(LogError::Empty { line: 1 });
    }
    Ok(records)
}

/// Single-writer handle on a run log file.
pub struct RunLog {
    path: PathBuf,
}

impl RunLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn io(&self, source: io::Error) -> LogError {
        LogError::Io {
            path: self.path.clone(),
            source,
        }
    }

    /// Fails early when the log cannot be opened for appending.
    pub fn check_writable(&self) -> Result<(), LogError> {
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map(|_| ())
            .map_err(|e| self.io(e))
    }

    pub fn append(&self, record: &RunRecord) -> Result<(), LogError> {
        let mut line = serialize_run(record)?;
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| self.io(e))?;
        f.write_all(line.as_bytes()).map_err(|e| self.io(e))?;
        f.sync_data().map_err(|e| self.io(e))
    }

    /// Reads and validates every record in the log.
    pub fn read_all(&self) -> Result<Vec<RunRecord>, LogError> {
        let reader = BufReader::new(File::open(&self.path).map_err(|e| self.io(e))?);
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| self.io(e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record = deserialize_run(&line, i + 1)?;
            validate_record(&record).map_err(|violations| LogError::Invalid {
                line: i + 1,
                violations,
            })?;
            records.push(record);
        }
        Ok(records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_stream_is_a_parse_error() {
        assert!(matches!(deserialize_log(b""), Err(LogError::Empty { .. })));
        assert!(matches!(deserialize_run("", 1), Err(LogError::Empty { .. })));
    }

    #[test]
    fn garbage_names_line() {
        let err = deserialize_log(b"{\"schema_version\":1}\nnot json").unwrap_err();
        // first line is missing fields, reported before the garbage
        assert!(err.to_string().starts_with("line 1"), "{err}");
        let err = deserialize_run("not json", 7).unwrap_err();
        assert!(err.to_string().starts_with("line 7"));
    }

    #[test]
    fn wrong_schema_version() {
        let err = deserialize_run("{\"schema_version\":2}", 1).unwrap_err();
        assert!(matches!(err, LogError::SchemaVersion { .. }));
    }
}
