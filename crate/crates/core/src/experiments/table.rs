use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ExperimentKind, OutputFormat};
use crate::error::{LabError, Result};

/// One table cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    /// An expectation declared infinite, with the fitted growth rate of its
    /// truncations.
    Divergent { exponent: f64 },
    Missing,
}

impl Cell {
    /// CSV encoding: reals with 17 significant digits.
    pub fn to_csv(&self) -> String {
        match self {
            Cell::Num(x) => format_real(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Divergent { .. } => "DIVERGENT".to_string(),
            Cell::Missing => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(x) => json!(format_real(*x)),
            Cell::Int(n) => json!(n),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Divergent { exponent } => json!({
                "status": "DIVERGENT",
                "growth_exponent": if exponent.is_finite() { json!(exponent) } else { json!(format_real(*exponent)) },
            }),
            Cell::Missing => Value::Null,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(n) => Some(*n as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<f32> for Cell {
    fn from(x: f32) -> Self {
        Cell::Num(x as f64)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// A checked property of the experiment; a failed assertion maps to exit code 4.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub kind: String,
    pub seed: u64,
    pub version: String,
    pub config: Value,
    /// Excluded from every determinism comparison.
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub kind: ExperimentKind,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Vec<(String, Cell)>,
    pub assertions: Vec<Assertion>,
    pub metadata: Metadata,
}

impl ResultTable {
    pub fn new(kind: ExperimentKind, columns: &[&str]) -> Self {
        ResultTable {
            kind,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: Vec::new(),
            assertions: Vec::new(),
            metadata: Metadata {
                kind: kind.as_str().into(),
                seed: 0,
                version: env!("CARGO_PKG_VERSION").into(),
                config: Value::Null,
                wall_clock_seconds: 0.0,
            },
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the column schema");
        self.rows.push(row);
    }

    pub fn note(&mut self, name: &str, value: impl Into<Cell>) {
        self.summary.push((name.to_string(), value.into()));
    }

    pub fn assert(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn summary_value(&self, name: &str) -> Option<&Cell> {
        self.summary.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }

    /// The CSV body: header plus rows, no metadata.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let csv_err = |e: csv::Error| LabError::Config(format!("CSV encoding failed: {e}"));
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_csv)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::Config(format!("CSV encoding failed: {e}")))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                Value::Object(
                    self.columns
                        .iter()
                        .cloned()
                        .zip(row.iter().map(Cell::to_json))
                        .collect(),
                )
            })
            .collect();
        let summary: serde_json::Map<String, Value> =
            self.summary.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
        let doc = json!({
            "kind": self.kind.as_str(),
            "columns": self.columns,
            "rows": rows,
            "summary": summary,
            "assertions": self.assertions,
            "metadata": self.metadata,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("table serializes");
        s.push('\n');
        s
    }

    /// Writes `<dir>/<kind>.csv` and/or `<dir>/<kind>.json`.
    pub fn emit(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| LabError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
            let path = dir.join(format!("{}.csv", self.kind));
            fs::write(&path, self.to_csv()?).map_err(io(&path))?;
            written.push(path);
        }
        if matches!(format, OutputFormat::Json | OutputFormat::Both) {
            let path = dir.join(format!("{}.json", self.kind));
            fs::write(&path, self.to_json()).map_err(io(&path))?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let t = ResultTable::new(ExperimentKind::Solve, &["node", "y"]);
        assert_eq!(t.to_csv().unwrap(), "node,y\n");
    }

    #[test]
    fn reals_round_trip() {
        for x in [0.1f64, 1.0 / 3.0, 2f64.sqrt(), 1e-300, -6.02e23] {
            assert_eq!(format_real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn divergent_cells() {
        let mut t = ResultTable::new(ExperimentKind::Counterexample, &["quantity", "value"]);
        t.push(vec!["E".into(), Cell::Divergent { exponent: 0.4 }]);
        assert!(t.to_csv().unwrap().contains("E,DIVERGENT"));
        let v: Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["rows"][0]["value"]["status"], "DIVERGENT");
        assert_eq!(v["rows"][0]["value"]["growth_exponent"], 0.4);
    }

    #[test]
    fn emit_is_repeatable() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = ResultTable::new(ExperimentKind::Bound, &["a"]);
        t.push(vec![Cell::Num(1.5)]);
        let p = t.emit(dir.path(), OutputFormat::Both).unwrap();
        let first = fs::read(&p[0]).unwrap();
        t.emit(dir.path(), OutputFormat::Csv).unwrap();
        assert_eq!(fs::read(&p[0]).unwrap(), first);
        assert_eq!(p.len(), 2);
    }
}
