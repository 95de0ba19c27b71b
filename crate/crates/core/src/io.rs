//! Plain-text record reading and writing shared by every file format.
//!
//! Records are one per line; fields are separated by commas and/or
//! whitespace; blank lines and lines whose first non-blank character is
//! `#` are skipped. Floats are written with Rust's shortest round-trip
//! formatting so a write/read cycle is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::DenseMatrix;

/// One parsed line: 1-based line number plus its fields.
#[derive(Debug, Clone)]
pub struct Record {
    pub line: usize,
    pub fields: Vec<String>,
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn split_fields(line: &str) -> Vec<String> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
        .map(str::to_owned)
        .collect()
}

pub fn parse_records(text: &str) -> Vec<Record> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                return None;
            }
            Some(Record {
                line: i + 1,
                fields: split_fields(trimmed),
            })
        })
        .collect()
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    Ok(parse_records(&read_to_string(path)?))
}

pub fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: PathBuf::from(path),
        line,
        msg: msg.into(),
    }
}

/// Parses field `idx` of `rec`, naming file and line on failure.
pub fn field<T: FromStr>(path: &Path, rec: &Record, idx: usize, what: &str) -> Result<T> {
    let raw = rec
        .fields
        .get(idx)
        .ok_or_else(|| parse_error(path, rec.line, format!("missing field {what}")))?;
    raw.parse::<T>()
        .map_err(|_| parse_error(path, rec.line, format!("cannot parse {what} from {raw:?}")))
}

pub fn finite_field(path: &Path, rec: &Record, idx: usize, what: &str) -> Result<f64> {
    let v: f64 = field(path, rec, idx, what)?;
    if !v.is_finite() {
        return Err(parse_error(path, rec.line, format!("{what} is not finite")));
    }
    Ok(v)
}

/// Matrix as CSV: one row per line, no header.
pub fn matrix_to_csv(m: &DenseMatrix) -> String {
    let mut out = String::with_capacity(m.rows() * m.cols() * 12);
    for r in 0..m.rows() {
        for (c, v) in m.row(r).iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    write_string(path, &matrix_to_csv(m))
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let records = read_records(path)?;
    let cols = records.first().map_or(0, |r| r.fields.len());
    let mut data = Vec::with_capacity(records.len() * cols);
    for rec in &records {
        if rec.fields.len() != cols {
            return Err(parse_error(
                path,
                rec.line,
                format!("expected {cols} columns, found {}", rec.fields.len()),
            ));
        }
        for c in 0..cols {
            data.push(finite_field(path, rec, c, "matrix entry")?);
        }
    }
    DenseMatrix::from_vec(records.len(), cols, data)
}
