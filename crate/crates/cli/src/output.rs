//! Tabular artifacts and their CSV / JSON renderings.
//!
//! Rendering depends only on the artifact contents, so a fixed configuration
//! always produces the same bytes.

use clap::ValueEnum;
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    /// Rounded to the given number of decimals on output.
    Num(f64, usize),
    Int(i64),
    Bool(bool),
    Missing,
}

impl Cell {
    pub fn num(v: f64, dp: usize) -> Self {
        Cell::Num(v, dp)
    }

    pub fn opt(v: Option<f64>, dp: usize) -> Self {
        v.map_or(Cell::Missing, |v| Cell::Num(v, dp))
    }

    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(v, dp) => fixed(*v, *dp),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Missing => "NA".into(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Num(v, dp) if v.is_finite() => {
                let r: f64 = fixed(*v, *dp).parse().expect("formatted float parses");
                json!(r)
            }
            Cell::Num(..) | Cell::Missing => Value::Null,
            Cell::Int(i) => json!(i),
            Cell::Bool(b) => json!(b),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

/// Fixed-point formatting without a negative zero.
pub fn fixed(v: f64, dp: usize) -> String {
    if !v.is_finite() {
        return "NA".into();
    }
    let s = format!("{v:.dp$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Section {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in section {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Artifact {
    pub command: String,
    /// Run configuration, recorded in the header.
    pub meta: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub sections: Vec<Section>,
}

impl Artifact {
    pub fn new(command: &str) -> Self {
        Self { command: command.into(), ..Self::default() }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.to_json()).expect("serializable");
                s.push('\n');
                s
            }
        }
    }

    fn to_csv(&self) -> String {
        let mut out = format!("# rmcst {}\n", self.command);
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}={v}\n"));
        }
        for w in &self.warnings {
            out.push_str(&format!("# warning: {w}\n"));
        }
        for s in &self.sections {
            out.push_str(&format!("\n# section: {}\n", s.name));
            let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            wtr.write_record(&s.columns).expect("in-memory write");
            for r in &s.rows {
                wtr.write_record(r.iter().map(Cell::render)).expect("in-memory write");
            }
            out.push_str(&String::from_utf8(wtr.into_inner().expect("flush")).expect("utf-8 input"));
        }
        out
    }

    fn to_json(&self) -> Value {
        let meta: Map<String, Value> = self.meta.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        let sections: Vec<Value> = self
            .sections
            .iter()
            .map(|s| {
                json!({
                    "name": s.name,
                    "columns": s.columns,
                    "rows": s.rows.iter().map(|r| r.iter().map(Cell::to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "command": self.command,
            "meta": meta,
            "warnings": self.warnings,
            "sections": sections,
        })
    }
}
