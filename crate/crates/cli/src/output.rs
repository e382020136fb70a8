//! Tables, number formatting and the CSV / JSON emitters.

use std::io::Write;

use serde_json::{Map, Number, Value};

use crate::config::Format;

/// Version tag written into every JSON document; bump together with the
/// schema file under `schema/`.
pub const SCHEMA_ID: &str = "bosefunc-output/v1";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format_sig(*x, 12),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => json_number(*x),
            Cell::Int(i) => Value::from(*i),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Object(self.columns.iter().zip(r).map(|(c, v)| (c.to_string(), v.json())).collect()))
                .collect(),
        )
    }
}

/// Everything a command hands back for serialization.
#[derive(Debug, Clone)]
pub struct Report {
    pub config: Map<String, Value>,
    pub rows: Table,
    /// Verification checks; serialized as `checks` in JSON and as the CSV
    /// body when `rows` is empty.
    pub checks: Option<Table>,
}

impl Report {
    pub fn write(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Csv => {
                let table = match &self.checks {
                    Some(c) if self.rows.columns.is_empty() => c,
                    _ => &self.rows,
                };
                writeln!(out, "{}", table.columns.join(","))?;
                for row in &table.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    writeln!(out, "{}", cells.join(","))?;
                }
            }
            Format::Json => {
                let mut doc = Map::new();
                doc.insert("schema".into(), Value::String(SCHEMA_ID.into()));
                doc.insert("config".into(), Value::Object(self.config.clone()));
                doc.insert("rows".into(), self.rows.json_rows());
                if let Some(c) = &self.checks {
                    doc.insert("checks".into(), c.json_rows());
                }
                serde_json::to_writer_pretty(&mut *out, &Value::Object(doc))?;
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// A double with 17 significant digits; non-finite values become `null`.
pub fn json_number(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}").parse::<Number>().map(Value::Number).unwrap_or(Value::Null)
}

/// `%.{sig}g`-style formatting: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros dropped.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(2.0, 12), "2");
        assert_eq!(format_sig(-0.5, 12), "-0.5");
        assert_eq!(format_sig(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(format_sig(123456789012345.0, 12), "1.23456789012e14");
        assert_eq!(format_sig(1.5e-7, 12), "1.5e-7");
        assert_eq!(format_sig(9.9999999999999e-1, 12), "1");
        assert_eq!(format_sig(0.0001, 12), "0.0001");
        assert_eq!(format_sig(f64::NAN, 12), "NaN");
    }

    #[test]
    fn json_numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            let v = json_number(x);
            let s = serde_json::to_string(&v).unwrap();
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert_eq!(digits, 17, "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(json_number(f64::NAN), Value::Null);
        assert_eq!(serde_json::to_string(&json_number(-0.0)).unwrap(), serde_json::to_string(&json_number(0.0)).unwrap());
    }

    #[test]
    fn csv_quotes_text() {
        assert_eq!(Cell::Text("a, b".into()).csv(), "\"a, b\"");
        assert_eq!(Cell::Text("say \"x\"".into()).csv(), "\"say \"\"x\"\"\"");
        assert_eq!(Cell::Text("plain".into()).csv(), "plain");
    }

    #[test]
    fn csv_has_header_even_when_empty() {
        let r = Report { config: Map::new(), rows: Table::new(vec!["a", "b"]), checks: None };
        let mut buf = Vec::new();
        r.write(Format::Csv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n");
    }
}
