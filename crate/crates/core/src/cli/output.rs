//! CSV and JSON writers. Both carry the config, version and seed.

use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};

use super::config::RunConfig;

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits round-trip every f64
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// What a command produced: typed reports for JSON and a flat table for CSV.
#[derive(Debug, Clone, Default)]
pub struct CommandOutput {
    pub reports: Vec<Value>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Map<String, Value>,
    /// A verified property failed.
    pub violation: bool,
}

impl CommandOutput {
    pub fn new(columns: &[&'static str]) -> Self {
        CommandOutput {
            columns: columns.to_vec(),
            ..Default::default()
        }
    }

    pub fn report<T: Serialize>(&mut self, r: &T) {
        self.reports.push(serde_json::to_value(r).expect("reports serialize"));
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn set<T: Serialize>(&mut self, key: &str, value: T) {
        self.summary
            .insert(key.into(), serde_json::to_value(value).expect("summary serializes"));
    }
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn status(out: &CommandOutput) -> &'static str {
    if out.violation {
        "violation"
    } else {
        "ok"
    }
}

fn summary(command: &str, out: &CommandOutput) -> Map<String, Value> {
    let mut s = Map::new();
    s.insert("command".into(), command.into());
    s.insert("backend".into(), crate::exec::backend().into());
    s.insert("status".into(), status(out).into());
    s.extend(out.summary.clone());
    s
}

pub fn write_json<W: Write>(w: &mut W, command: &str, cfg: &RunConfig, out: &CommandOutput) -> std::io::Result<()> {
    let mut doc = Map::new();
    doc.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    doc.insert("version".into(), VERSION.into());
    doc.insert("seed".into(), cfg.seed.into());
    doc.insert("reports".into(), Value::Array(out.reports.clone()));
    doc.insert("summary".into(), Value::Object(summary(command, out)));
    serde_json::to_writer_pretty(&mut *w, &Value::Object(doc))?;
    writeln!(w)
}

pub fn write_csv<W: Write>(w: &mut W, command: &str, cfg: &RunConfig, out: &CommandOutput) -> std::io::Result<()> {
    writeln!(w, "# command: {command}")?;
    writeln!(w, "# version: {VERSION}")?;
    writeln!(w, "# seed: {}", cfg.seed)?;
    writeln!(w, "# backend: {}", crate::exec::backend())?;
    writeln!(w, "# config: {}", serde_json::to_string(cfg).expect("config serializes"))?;
    writeln!(
        w,
        "# summary: {}",
        serde_json::to_string(&Value::Object(summary(command, out))).expect("summary serializes")
    )?;
    writeln!(w, "# columns: {}", out.columns.join(","))?;
    let mut csv = csv::Writer::from_writer(&mut *w);
    csv.write_record(&out.columns)?;
    for row in &out.rows {
        csv.write_record(row.iter().map(Cell::render))?;
    }
    csv.flush()
}
