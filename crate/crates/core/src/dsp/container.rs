//! Flat binary matrix container: `"MELV1"`, `u32` rows, `u32` cols, then the
//! row-major `f64` payload, all little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{Error, Matrix, Result};

pub const MATRIX_MAGIC: &[u8; 5] = b"MELV1";

pub fn write_matrix_to<W: Write>(mut w: W, m: &Matrix) -> std::io::Result<()> {
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(m.rows() as u32).to_le_bytes())?;
    w.write_all(&(m.cols() as u32).to_le_bytes())?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

pub fn read_matrix_from<R: Read>(mut r: R) -> Result<Matrix> {
    let malformed = |what: &str| Error::MalformedHeader(format!("matrix container: {what}"));
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(|_| malformed("truncated magic"))?;
    if &magic != MATRIX_MAGIC {
        return Err(malformed("bad magic"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(|_| malformed("truncated row count"))?;
    let rows = u32::from_le_bytes(word) as usize;
    r.read_exact(&mut word).map_err(|_| malformed("truncated column count"))?;
    let cols = u32::from_le_bytes(word) as usize;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(|_| malformed("unreadable payload"))?;
    if payload.len() != rows * cols * 8 {
        return Err(malformed(&format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            rows * cols * 8
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_matrix_to(BufWriter::new(f), m).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix_from(BufReader::new(f))
}
