//! Tabular results and their CSV/JSON serialization.
//!
//! Files are written to a temporary sibling and renamed into place, so a
//! failed write never leaves a partial file behind. Floats use the shortest
//! representation that round-trips exactly; non-finite values become `NaN`
//! in CSV and `null` in JSON.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value as Json};

use crate::manifest::OutputFormat;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Int(u64),
    Text(String),
    Null,
}

impl Value {
    fn csv_field(&self) -> String {
        match self {
            Value::Float(v) if v.is_nan() => "NaN".into(),
            Value::Float(v) => format!("{v:?}"),
            Value::Int(v) => v.to_string(),
            Value::Text(s) => s.clone(),
            Value::Null => String::new(),
        }
    }

    fn json(&self) -> Json {
        match self {
            Value::Float(v) => serde_json::Number::from_f64(*v).map_or(Json::Null, Json::Number),
            Value::Int(v) => Json::from(*v),
            Value::Text(s) => Json::from(s.as_str()),
            Value::Null => Json::Null,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Float(v) => Some(*v),
            Value::Int(v) => Some(*v as f64),
            _ => None,
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.into())
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Null, Into::into)
    }
}

/// Rows under a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width does not match header"
        );
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, row: usize, name: &str) -> Option<&Value> {
        self.rows.get(row)?.get(self.column(name)?)
    }

    /// The named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Table {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column(n).unwrap_or_else(|| panic!("no column {n}")))
            .collect();
        Table {
            columns: names.iter().map(|s| s.to_string()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
                .collect(),
        }
    }
}

/// Header lines identifying how a file was produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("spinsim {}", self.version),
            format!("command: {}", self.command),
            match self.seed {
                Some(s) => format!("seed: {s}"),
                None => "seed: none".into(),
            },
        ]
    }

    fn json(&self) -> Json {
        let mut m = Map::new();
        m.insert("version".into(), Json::from(self.version.as_str()));
        m.insert("command".into(), Json::from(self.command.as_str()));
        m.insert("seed".into(), self.seed.map_or(Json::Null, Json::from));
        Json::Object(m)
    }
}

pub fn render_csv(table: &Table, prov: &Provenance) -> Vec<u8> {
    let mut buf = Vec::new();
    for line in prov.lines() {
        writeln!(buf, "# {line}").expect("write to Vec");
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(buf);
    w.write_record(&table.columns).expect("write to Vec");
    for row in &table.rows {
        w.write_record(row.iter().map(Value::csv_field))
            .expect("write to Vec");
    }
    w.into_inner().expect("flush to Vec")
}

/// `{"provenance": {...}, "records": [{column: value, ...}, ...]}`.
pub fn render_json(table: &Table, prov: &Provenance) -> Vec<u8> {
    let records: Vec<Json> = table
        .rows
        .iter()
        .map(|row| {
            Json::Object(
                table
                    .columns
                    .iter()
                    .cloned()
                    .zip(row.iter().map(Value::json))
                    .collect(),
            )
        })
        .collect();
    let mut top = Map::new();
    top.insert("provenance".into(), prov.json());
    top.insert("records".into(), Json::Array(records));
    let mut out = serde_json::to_vec_pretty(&Json::Object(top)).expect("serializable");
    out.push(b'\n');
    out
}

/// Writes `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Serializes `table` in `format` and writes it to `path`. Empty tables are
/// rejected before anything touches the file system.
pub fn write_table(
    path: &Path,
    table: &Table,
    format: OutputFormat,
    prov: &Provenance,
) -> Result<(), CliError> {
    if table.rows.is_empty() {
        return Err(CliError::Invariant(format!(
            "no rows to write to {}",
            path.display()
        )));
    }
    let bytes = match format {
        OutputFormat::Csv => render_csv(table, prov),
        OutputFormat::Json => render_json(table, prov),
    };
    write_atomic(path, &bytes)?;
    log::info!("wrote {} rows to {}", table.rows.len(), path.display());
    Ok(())
}
