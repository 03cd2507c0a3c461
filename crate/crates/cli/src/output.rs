//! Result records and their CSV / JSON emission.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Format;
use crate::error::CliError;

/// One result: inputs echo, outputs, verdict and provenance. Wall time is
/// deliberately absent so identical configs give identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub experiment: String,
    pub id: String,
    pub seed: u64,
    pub inputs: Value,
    pub outputs: Value,
    pub verdict: Option<String>,
    pub provenance: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// 17 significant digits, or inf / -inf / nan.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Default)]
pub struct Output {
    pub records: Vec<Record>,
    pub table: Table,
    /// Count of bound-violation verdicts.
    pub violations: usize,
}

pub fn write_csv<W: Write>(table: &Table, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(std::io::Error::other(e));
    w.write_record(&table.columns).map_err(io)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render)).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(records: &[Record], mut out: W) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, records).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    writeln!(out)?;
    Ok(())
}

/// Writes to `path`, or stdout when `None`.
pub fn emit(output: &Output, format: Format, path: Option<&Path>) -> Result<(), CliError> {
    if output.records.is_empty() {
        return Err(CliError::config("experiment", "produced no records".into()));
    }
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    match format {
        Format::Csv => write_csv(&output.table, sink),
        Format::Json => write_json(&output.records, sink),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(f64::INFINITY), "inf");
        let v: f64 = format_float(std::f64::consts::PI).parse().unwrap();
        assert_eq!(v, std::f64::consts::PI);
    }

    #[test]
    fn json_round_trip() {
        let r = Record {
            experiment: "norm".into(),
            id: "bphi".into(),
            seed: 7,
            inputs: serde_json::json!({"phi": "quadratic{d=1}"}),
            outputs: serde_json::json!({"value": 0.1 + 0.2, "bracket": [1e-300, 2.5]}),
            verdict: None,
            provenance: serde_json::json!({"plan": "x"}),
        };
        let mut buf = Vec::new();
        write_json(std::slice::from_ref(&r), &mut buf).unwrap();
        let back: Vec<Record> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(vec!["x".into(), "verdict".into()]);
        t.push(vec![Cell::Num(0.5), Cell::text("pass")]);
        let mut buf = Vec::new();
        write_csv(&t, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,verdict\n5.0000000000000000e-1,pass\n");
    }
}
