//! Matrix file formats and lossless float formatting.
//!
//! CSV: first line `n`, then `n` lines of `n` comma-separated decimals.
//! Binary: magic `SIMM`, version byte `1`, `n` as u64 little-endian, then
//! `n²` f64 little-endian values in row-major order.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::oracle::DenseOracle;

pub const MAGIC: &[u8; 4] = b"SIMM";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// `.csv` selects CSV; anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Binary,
        }
    }
}

/// Shortest-unambiguous scientific form with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn encode_csv(m: &DMatrix<f64>) -> String {
    let n = m.nrows();
    let mut out = String::with_capacity(n * n * 24 + 16);
    out.push_str(&n.to_string());
    out.push('\n');
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| fmt_f64(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn encode_binary(m: &DMatrix<f64>) -> Vec<u8> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * n);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for i in 0..n {
        for j in 0..n {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::Format(format!("matrix is {}x{}, expected non-empty square", m.nrows(), m.ncols())));
    }
    Ok(())
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>, format: MatrixFormat) -> Result<()> {
    check_square(m)?;
    let bytes = match format {
        MatrixFormat::Csv => encode_csv(m).into_bytes(),
        MatrixFormat::Binary => encode_binary(m),
    };
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn decode_binary(bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing SIMM header".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", bytes[4])));
    }
    let n = u64::from_le_bytes(bytes[5..13].try_into().expect("8 bytes")) as usize;
    let expected = n
        .checked_mul(n)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format("size overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!("expected {expected} bytes for n = {n}, found {}", bytes.len())));
    }
    let values = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let m = DMatrix::from_row_iterator(n, n, values);
    check_square(&m)?;
    Ok(m)
}

pub fn decode_csv<R: BufRead>(reader: R) -> Result<DMatrix<f64>> {
    let mut lines = reader.lines().enumerate().filter_map(|(k, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((k + 1, other)),
    });
    let (_, header) = lines.next().ok_or_else(|| Error::Format("empty file".into()))?;
    let header = header?;
    let n: usize = header.trim().parse().map_err(|_| Error::Format(format!("bad size line '{}'", header.trim())))?;
    let mut data = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (lineno, line) in lines {
        let line = line?;
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("line {lineno}: bad number '{}'", field.trim())))?;
            data.push(v);
        }
        if data.len() - before != n {
            return Err(Error::Format(format!("line {lineno}: expected {n} values, found {}", data.len() - before)));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Format(format!("expected {n} rows, found {rows}")));
    }
    let m = DMatrix::from_row_slice(n, n, &data);
    check_square(&m)?;
    Ok(m)
}

/// Reads either format, detected from the leading magic bytes.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(MAGIC) {
        decode_binary(&bytes)
    } else {
        decode_csv(BufReader::new(bytes.as_slice()))
    }
}

/// Loads a stored matrix; non-finite entries are a load error.
pub fn stored_matrix_oracle(path: &Path) -> Result<DenseOracle> {
    DenseOracle::new(read_matrix(path)?)
}

/// Numeric rows of a CSV file. Blank lines and `#` comments are skipped, and
/// a first line that does not parse is taken as a header.
pub fn read_float_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Format(format!("line {}: non-finite value", k + 1)));
                }
                rows.push(row);
            }
            Err(_) if rows.is_empty() && k == 0 => continue,
            Err(_) => return Err(Error::Format(format!("line {}: bad number", k + 1))),
        }
    }
    Ok(rows)
}
