//! Matrix files: headerless numeric CSV, or a little-endian binary layout
//! `RIDGEMAT | n: u64 | p: u64 | n·p f64 values, column-major`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RIDGEMAT";

fn file_err(path: &Path, message: impl Into<String>) -> Error {
    Error::File {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads a matrix, choosing the format from the leading magic bytes.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| file_err(path, e.to_string()))?;
    if bytes.starts_with(MAGIC) {
        parse_binary(&bytes).map_err(|m| file_err(path, m))
    } else {
        parse_csv(&bytes).map_err(|m| file_err(path, m))
    }
}

/// Reads a response vector stored as one column or one row.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    match m.shape() {
        (_, 1) => Ok(m.column(0).into_owned()),
        (1, _) => Ok(m.row(0).transpose()),
        (r, c) => Err(file_err(path, format!("expected a single column or row, found {r}x{c}"))),
    }
}

fn parse_csv(bytes: &[u8]) -> std::result::Result<DMatrix<f64>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(bytes);
    let mut values: Vec<f64> = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let expected = *ncols.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(format!("line {line}: expected {expected} fields, found {}", rec.len()));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| format!("line {line}, field {}: expected a number, found '{field}'", j + 1))?;
            if !v.is_finite() {
                return Err(format!("line {line}, field {}: expected a finite number, found '{field}'", j + 1));
            }
            values.push(v);
        }
        nrows += 1;
    }
    let ncols = ncols.ok_or("file contains no data rows")?;
    Ok(DMatrix::from_row_slice(nrows, ncols, &values))
}

fn parse_binary(bytes: &[u8]) -> std::result::Result<DMatrix<f64>, String> {
    let header = 8 + 16;
    if bytes.len() < header {
        return Err("binary header truncated".into());
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let p = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let expected = n
        .checked_mul(p)
        .and_then(|k| k.checked_mul(8))
        .ok_or_else(|| format!("declared shape {n}x{p} overflows"))?;
    if bytes.len() - header != expected {
        return Err(format!(
            "declared shape {n}x{p} needs {expected} data bytes, found {}",
            bytes.len() - header
        ));
    }
    let values: Vec<f64> = bytes[header..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(format!("entry ({}, {}) is not finite", i % n.max(1), i / n.max(1)));
    }
    Ok(DMatrix::from_vec(n, p, values))
}

pub fn write_matrix_binary(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| file_err(path, e.to_string()))?);
    w.write_all(MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for v in m.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(
        File::create(path).map_err(|e| file_err(path, e.to_string()))?,
    ));
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| file_err(path, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vector_csv(path: &Path, v: &DVector<f64>) -> Result<()> {
    write_matrix_csv(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}
