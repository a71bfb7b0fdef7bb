//! Minimal 8-bit binary PGM (P5) reader feeding the image-column pipeline.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linops::DenseVector;

/// Grayscale image, row-major, values in `[0, maxval]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u8>,
}

fn malformed(offset: usize, reason: impl Into<String>) -> Error {
    Error::Malformed {
        format: "pgm",
        offset: offset as u64,
        reason: reason.into(),
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(malformed(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed(start, format!("{what} out of range")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if !bytes.starts_with(b"P5") {
        return Err(malformed(0, "not a binary PGM (missing P5 magic)"));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    h.skip_space_and_comments();
    let maxval_at = h.pos;
    let maxval = h.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(malformed(maxval_at, format!("maxval {maxval} unsupported (need 1..=255)")));
    }
    if width == 0 || height == 0 {
        return Err(malformed(maxval_at, "empty image"));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(malformed(h.pos, "expected whitespace after maxval")),
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| malformed(0, "image too large"))?;
    let pixels = bytes
        .get(h.pos..h.pos + count)
        .ok_or_else(|| malformed(bytes.len(), format!("truncated raster: need {count} bytes from offset {}", h.pos)))?;
    if let Some(i) = pixels.iter().position(|&p| p as usize > maxval) {
        return Err(malformed(h.pos + i, "pixel exceeds maxval"));
    }
    Ok(GrayImage {
        width,
        height,
        maxval: maxval as u16,
        pixels: pixels.to_vec(),
    })
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Center-crops to the largest square whose side is a multiple of `n`,
/// box-averages down to `n x n`, scales to `[0, 1]` and returns the columns.
pub fn image_columns(img: &GrayImage, n: usize) -> Result<Vec<DenseVector>> {
    let side = img.width.min(img.height);
    if n == 0 || n > side {
        return Err(Error::InvalidArgument(format!(
            "target side {n} must be in 1..={side} for a {}x{} image",
            img.width, img.height
        )));
    }
    let block = side / n;
    let used = block * n;
    let x0 = (img.width - used) / 2;
    let y0 = (img.height - used) / 2;
    let denom = img.maxval as f64 * (block * block) as f64;
    Ok((0..n)
        .map(|col| {
            DenseVector::from_fn(n, |row| {
                let mut sum = 0u64;
                for dy in 0..block {
                    let line = (y0 + row * block + dy) * img.width;
                    for dx in 0..block {
                        sum += img.pixels[line + x0 + col * block + dx] as u64;
                    }
                }
                sum as f64 / denom
            })
        })
        .collect())
}

/// Reads a P5 file and returns its `n x n` columns as a signal sequence.
pub fn load_image_columns(path: &Path, n: usize) -> Result<Vec<DenseVector>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    image_columns(&decode_pgm(&bytes)?, n)
}
