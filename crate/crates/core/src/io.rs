//! Panel and matrix file formats.
//!
//! * CSV with a header row: `t,x1,...,xp` for panels, `x1,...,xp` for matrices.
//! * `HDTS1` binary: the 5-byte magic `HDTS1`, row count and column count as
//!   little-endian `u64`, then the entries as little-endian `f64` in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Panel;

pub const MAGIC: &[u8; 5] = b"HDTS1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Binary,
}

impl Format {
    /// `.bin` and `.hdts` select the binary format, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("hdts") => Format::Binary,
            _ => Format::Csv,
        }
    }
}

pub fn write_panel(panel: &Panel, path: &Path) -> Result<()> {
    match Format::from_path(path) {
        Format::Csv => write_csv(&panel.data, path, true),
        Format::Binary => write_binary(&panel.data, path),
    }
}

pub fn read_panel(path: &Path) -> Result<Panel> {
    let data = match Format::from_path(path) {
        Format::Csv => read_csv(path, true)?,
        Format::Binary => read_binary(path)?,
    };
    Panel::from_data(data)
}

pub fn write_matrix(m: &Array2<f64>, path: &Path) -> Result<()> {
    match Format::from_path(path) {
        Format::Csv => write_csv(m, path, false),
        Format::Binary => write_binary(m, path),
    }
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    match Format::from_path(path) {
        Format::Csv => read_csv(path, false),
        Format::Binary => read_binary(path),
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("json encoding: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

fn write_csv(m: &Array2<f64>, path: &Path, time_index: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header: Vec<String> = Vec::with_capacity(m.ncols() + 1);
    if time_index {
        header.push("t".into());
    }
    header.extend((1..=m.ncols()).map(|j| format!("x{j}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for (i, row) in m.rows().into_iter().enumerate() {
        record.clear();
        if time_index {
            record.push(i.to_string());
        }
        // `{:?}` on f64 prints the shortest representation that round-trips
        record.extend(row.iter().map(|v| format!("{v:?}")));
        w.write_record(&record).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv(path: &Path, time_index: bool) -> Result<Array2<f64>> {
    let file = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Missing(format!("{} not found", path.display()))
        } else {
            Error::Io(e)
        }
    })?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let skip = usize::from(time_index && headers.get(0) == Some("t"));
    let p = headers.len() - skip;
    if p == 0 {
        return Err(csv_err(path, "no data columns"));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != headers.len() {
            return Err(csv_err(path, format!("row {} has {} fields, expected {}", line + 2, rec.len(), headers.len())));
        }
        for (col, field) in rec.iter().enumerate().skip(skip) {
            let v: f64 = field.trim().parse().map_err(|_| {
                csv_err(path, format!("row {}, column {}: cannot parse {field:?}", line + 2, col + 1))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(csv_err(path, "no data rows"));
    }
    Ok(Array2::from_shape_vec((rows, p), values).expect("shape"))
}

fn write_binary(m: &Array2<f64>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for v in m.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_binary(path: &Path) -> Result<Array2<f64>> {
    let mut bytes = Vec::new();
    File::open(path)
        .map_err(|e| Error::Missing(format!("{}: {e}", path.display())))?
        .read_to_end(&mut bytes)?;
    decode_binary(&bytes).map_err(|e| csv_err(path, e))
}

pub fn decode_binary(bytes: &[u8]) -> std::result::Result<Array2<f64>, String> {
    if bytes.len() < 21 || &bytes[..5] != MAGIC {
        return Err("missing HDTS1 header".into());
    }
    let rows = u64::from_le_bytes(bytes[5..13].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[13..21].try_into().unwrap()) as usize;
    let body = &bytes[21..];
    if rows.checked_mul(cols).and_then(|c| c.checked_mul(8)) != Some(body.len()) {
        return Err(format!("payload of {} bytes does not match {rows}x{cols}", body.len()));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), values).expect("shape"))
}
