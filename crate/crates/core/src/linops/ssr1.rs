//! `SSR1` binary matrix format.
//!
//! Layout: ASCII magic `SSR1`, rows and cols as little-endian `u64`, then
//! `rows * cols` little-endian IEEE-754 doubles in row-major order. Several
//! records may be concatenated in one file.

use std::io::{self, Read, Write};
use std::path::Path;

use super::DenseMatrix;
use crate::error::{Error, Result};
use crate::fsutil;

pub const MAGIC: &[u8; 4] = b"SSR1";
const HEADER_LEN: u64 = 4 + 8 + 8;

pub fn encode(m: &DenseMatrix, out: &mut Vec<u8>) {
    out.reserve(HEADER_LEN as usize + 8 * m.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn write_matrix<W: Write>(m: &DenseMatrix, mut w: W) -> io::Result<()> {
    let mut buf = Vec::new();
    encode(m, &mut buf);
    w.write_all(&buf)
}

/// Reader that tracks its byte offset, for error messages.
pub struct RecordReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> RecordReader<R> {
    pub fn new(inner: R) -> Self {
        RecordReader { inner, offset: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn malformed(&self, reason: impl Into<String>) -> Error {
        Error::Malformed {
            format: "SSR1",
            offset: self.offset,
            reason: reason.into(),
        }
    }

    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let mut read = 0;
        while read < buf.len() {
            match self.inner.read(&mut buf[read..]) {
                Ok(0) => return Err(self.malformed(format!("truncated {what}"))),
                Ok(n) => read += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(self.malformed(e.to_string())),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn read_u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.fill(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    /// Reads one record.
    pub fn read_matrix(&mut self) -> Result<DenseMatrix> {
        let start = self.offset;
        let mut magic = [0u8; 4];
        self.fill(&mut magic, "magic")?;
        if &magic != MAGIC {
            self.offset = start;
            return Err(self.malformed(format!("bad magic {magic:?}")));
        }
        let rows = self.read_u64("row count")?;
        let cols = self.read_u64("column count")?;
        let count = rows
            .checked_mul(cols)
            .filter(|c| *c <= (u32::MAX as u64))
            .ok_or_else(|| self.malformed(format!("implausible shape {rows}x{cols}")))?
            as usize;
        let mut data = Vec::with_capacity(count);
        let mut b = [0u8; 8];
        for _ in 0..count {
            self.fill(&mut b, "matrix data")?;
            let v = f64::from_le_bytes(b);
            if !v.is_finite() {
                self.offset -= 8;
                return Err(self.malformed("non-finite value"));
            }
            data.push(v);
        }
        DenseMatrix::from_vec(rows as usize, cols as usize, data)
    }
}

pub fn read_matrix<R: Read>(r: R) -> Result<DenseMatrix> {
    RecordReader::new(r).read_matrix()
}

pub fn save(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut buf = Vec::new();
    encode(m, &mut buf);
    fsutil::atomic_write(path, &buf)
}

pub fn load(path: &Path) -> Result<DenseMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_matrix(bytes.as_slice())
}

/// Loads every record in a file of concatenated SSR1 records.
pub fn load_all(path: &Path) -> Result<Vec<DenseMatrix>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = RecordReader::new(bytes.as_slice());
    let mut out = Vec::new();
    while (reader.offset() as usize) < bytes.len() {
        out.push(reader.read_matrix()?);
    }
    Ok(out)
}
