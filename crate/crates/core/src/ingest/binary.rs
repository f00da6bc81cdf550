//! Little-endian embedding files.
//!
//! Sample embeddings (`SEMB`): magic, `u32` version, `u32` M, `u32` d, then
//! `M·d` `f32` values row-major. Token embeddings (`SEMT`): magic, `u32`
//! version, `u32` M, `u32` d, then per sample `u32 n_i` followed by `n_i·d`
//! `f32` values.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::IngestError;
use crate::matrix::Matrix;

pub const SAMPLE_MAGIC: &[u8; 4] = b"SEMB";
pub const TOKEN_MAGIC: &[u8; 4] = b"SEMT";
pub const FORMAT_VERSION: u32 = 1;

/// Cursor over a byte buffer that reports failures with their byte offset.
pub(crate) struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Self {
            path,
            bytes,
            pos: 0,
        }
    }

    pub(crate) fn error(&self, offset: usize, message: impl Into<String>) -> IngestError {
        IngestError::Binary {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], IngestError> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error(self.pos, format!("unexpected end of file reading {what}")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> Result<(), IngestError> {
        let got = self.take(4, "magic")?;
        if got != expected {
            return Err(self.error(
                0,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8, IngestError> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32, IngestError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64, IngestError> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    pub(crate) fn f32(&mut self, what: &str) -> Result<f32, IngestError> {
        let b = self.take(4, what)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64, IngestError> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    /// Reads `rows·cols` finite `f32` values into a matrix.
    pub(crate) fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix, IngestError> {
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| self.error(self.pos, "matrix size overflows"))?;
        if (self.bytes.len() - self.pos) / 4 < count {
            return Err(self.error(
                self.pos,
                format!("unexpected end of file: need {count} float32 values"),
            ));
        }
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let offset = self.pos;
            let v = self.f32("embedding value")?;
            if !v.is_finite() {
                return Err(IngestError::NonFinite {
                    path: self.path.to_path_buf(),
                    offset: offset as u64,
                });
            }
            data.push(f64::from(v));
        }
        Ok(Matrix::from_vec(rows, cols, data))
    }

    pub(crate) fn finish(&self) -> Result<(), IngestError> {
        if self.pos != self.bytes.len() {
            return Err(self.error(
                self.pos,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }

    fn version(&mut self) -> Result<(), IngestError> {
        let at = self.pos;
        let v = self.u32("version")?;
        if v != FORMAT_VERSION {
            return Err(self.error(at, format!("unsupported version {v}")));
        }
        Ok(())
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, IngestError> {
    fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a `SEMB` file into an `M × d` matrix.
pub fn read_sample_embeddings(path: &Path) -> Result<Matrix, IngestError> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    r.magic(SAMPLE_MAGIC)?;
    r.version()?;
    let m = r.u32("sample count")? as usize;
    let d = r.u32("dimension")? as usize;
    if d == 0 {
        return Err(r.error(12, "dimension must be positive"));
    }
    let matrix = r.matrix(m, d)?;
    r.finish()?;
    Ok(matrix)
}

/// Reads a `SEMT` file into one `n_i × d` matrix per sample.
pub fn read_token_embeddings(path: &Path) -> Result<(usize, Vec<Matrix>), IngestError> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    r.magic(TOKEN_MAGIC)?;
    r.version()?;
    let m = r.u32("sample count")? as usize;
    let d = r.u32("dimension")? as usize;
    if d == 0 {
        return Err(r.error(12, "dimension must be positive"));
    }
    let mut matrices = Vec::with_capacity(m.min(1 << 20));
    for _ in 0..m {
        let n = r.u32("token count")? as usize;
        matrices.push(r.matrix(n, d)?);
    }
    r.finish()?;
    Ok((d, matrices))
}

fn put_matrix(out: &mut Vec<u8>, m: &Matrix) {
    for v in m.as_slice() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    f.sync_all()
}

pub fn encode_sample_embeddings(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * m.as_slice().len());
    out.extend_from_slice(SAMPLE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    put_matrix(&mut out, m);
    out
}

pub fn encode_token_embeddings(dim: usize, matrices: &[Matrix]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(TOKEN_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(matrices.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for m in matrices {
        out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
        put_matrix(&mut out, m);
    }
    out
}

pub fn write_sample_embeddings(path: &Path, m: &Matrix) -> io::Result<()> {
    write_bytes(path, &encode_sample_embeddings(m))
}

pub fn write_token_embeddings(path: &Path, dim: usize, matrices: &[Matrix]) -> io::Result<()> {
    write_bytes(path, &encode_token_embeddings(dim, matrices))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_token_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.semt");
        let mats = vec![
            Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.5]]),
            Matrix::from_rows(&[[-1.0, 0.25]]),
        ];
        write_token_embeddings(&path, 2, &mats).unwrap();
        let (d, back) = read_token_embeddings(&path).unwrap();
        assert_eq!(d, 2);
        assert_eq!(back, mats);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.semb");
        let mut bytes = encode_sample_embeddings(&Matrix::from_rows(&[[1.0, 2.0]]));
        bytes.truncate(bytes.len() - 2);
        fs::write(&path, &bytes).unwrap();
        let err = read_sample_embeddings(&path).unwrap_err();
        assert!(matches!(err, IngestError::Binary { offset: 16, .. }), "{err}");

        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        let err = read_sample_embeddings(&path).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn rejects_non_finite_with_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.semb");
        let mut bytes = encode_sample_embeddings(&Matrix::from_rows(&[[1.0, 2.0]]));
        bytes[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        let err = read_sample_embeddings(&path).unwrap_err();
        assert!(matches!(err, IngestError::NonFinite { offset: 20, .. }), "{err}");
    }
}
