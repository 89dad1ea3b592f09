//! Tabular output shared by the CSV and JSON encoders.

use std::io::Write;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const CSV_HEADER: &str = "# stickyflow-csv v1";

/// Named columns of numbers, booleans or text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell_text))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let body = text.strip_prefix(CSV_HEADER).context("missing `# stickyflow-csv v1` header")?;
        let mut r = csv::Reader::from_reader(body.trim_start_matches(['\r', '\n']).as_bytes());
        let columns = r.headers()?.iter().map(str::to_string).collect();
        let mut table = Self { columns, rows: Vec::new() };
        for record in r.records() {
            table.rows.push(record?.iter().map(parse_cell).collect());
        }
        Ok(table)
    }

    /// Numeric column `name`.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let Some(j) = self.columns.iter().position(|c| c == name) else { bail!("no column {name:?}") };
        self.rows.iter().map(|r| r[j].as_f64().with_context(|| format!("non-numeric value in column {name:?}"))).collect()
    }
}

pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn int(x: i64) -> Value {
    Value::from(x)
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn parse_cell(s: &str) -> Value {
    if s.is_empty() {
        return Value::Null;
    }
    if let Ok(b) = s.parse::<bool>() {
        return Value::Bool(b);
    }
    serde_json::from_str::<serde_json::Number>(s).map_or_else(|_| Value::String(s.to_string()), Value::Number)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(["name", "x", "n", "ok"]);
        t.push(vec![Value::from("a, b"), num(0.1 + 0.2), int(-3), Value::Bool(true)]);
        t.push(vec![Value::from("plain"), num(1e-300), int(7), Value::Bool(false)]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Table::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("x").unwrap(), vec![0.1 + 0.2, 1e-300]);
    }
}
