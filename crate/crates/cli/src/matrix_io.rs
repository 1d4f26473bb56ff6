//! Precomputed similarity matrices: square CSV or the `ACSM` binary layout
//! (magic bytes, little-endian `u64` order, then `n * n` little-endian `f64`
//! values in row-major order).

use std::io::Write;
use std::path::Path;

use activeclust_core::similarity::SimilarityMatrix;
use activeclust_core::Matrix;

use crate::error::{Error, Result};

pub const ACSM_MAGIC: &[u8; 4] = b"ACSM";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// `.acsm` and `.bin` files are binary, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("acsm" | "bin") => MatrixFormat::Binary,
            _ => MatrixFormat::Csv,
        }
    }
}

/// Reads either format, detected from the leading magic bytes. The matrix is
/// symmetrized and its diagonal zeroed.
pub fn load_precomputed_similarity(path: &Path) -> Result<SimilarityMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let m = if bytes.starts_with(ACSM_MAGIC) { decode_binary(&bytes, path)? } else { decode_csv(&bytes, path)? };
    Ok(SimilarityMatrix::from_matrix(m)?)
}

fn decode_binary(bytes: &[u8], path: &Path) -> Result<Matrix> {
    let header = 4 + 8;
    if bytes.len() < header {
        return Err(Error::parse(path, 0, "truncated ACSM header"));
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let expected = n
        .checked_mul(n)
        .and_then(|c| c.checked_mul(8))
        .and_then(|b| b.checked_add(header))
        .ok_or_else(|| Error::parse(path, 0, format!("ACSM order {n} too large")))?;
    if bytes.len() != expected {
        return Err(Error::parse(path, 0, format!("ACSM body has {} bytes, expected {expected}", bytes.len())));
    }
    let data = bytes[header..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(Matrix::from_vec(n, n, data)?)
}

fn decode_csv(bytes: &[u8], path: &Path) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(bytes);
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::parse(path, line, "ragged row"));
        }
        for v in rec.iter() {
            data.push(v.parse::<f64>().map_err(|_| Error::parse(path, line, format!("non-numeric entry {v:?}")))?);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    Ok(Matrix::from_vec(rows, cols, data)?)
}

pub fn save_similarity(w: &SimilarityMatrix, path: &Path, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Binary => encode_binary(w.as_matrix()),
        MatrixFormat::Csv => encode_csv(w.as_matrix()),
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_binary(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * m.as_slice().len());
    out.extend_from_slice(ACSM_MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn encode_csv(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::new();
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(",")).expect("writing to a Vec");
    }
    out
}
