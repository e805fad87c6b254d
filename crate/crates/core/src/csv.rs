//! Minimal CSV writer: header row required, `\n` terminators, floats with
//! 17 significant digits so values round-trip exactly.

use std::fmt::Write as _;

use crate::{Error, Result};

/// A CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

/// `{:.16e}` (17 significant digits); non-finite values as `nan`, `inf`, `-inf`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn format_cell(c: &Cell) -> Result<String> {
    match c {
        Cell::Int(i) => Ok(i.to_string()),
        Cell::Float(x) => Ok(format_float(*x)),
        Cell::Text(s) => {
            if s.contains([',', '"', '\n', '\r']) {
                Err(Error::Validation(format!("CSV text cell needs quoting: {s:?}")))
            } else {
                Ok(s.clone())
            }
        }
    }
}

/// In-memory table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Result<Self> {
        if header.is_empty() {
            return Err(Error::Validation("CSV header must not be empty".into()));
        }
        Ok(Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: vec![],
        })
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::shape(
                format!("{} columns", self.header.len()),
                format!("{} cells", row.len()),
            ));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Result<Vec<String>> = row.iter().map(format_cell).collect();
            let _ = writeln!(out, "{}", cells?.join(","));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(f64::NAN), "nan");
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&["index", "value"]).unwrap();
        t.push(vec![1usize.into(), 0.5.into()]).unwrap();
        assert!(t.push(vec![1usize.into()]).is_err());
        assert_eq!(t.to_csv().unwrap(), "index,value\n1,5.0000000000000000e-1\n");
        assert!(Table::new::<&str>(&[]).is_err());
    }
}
