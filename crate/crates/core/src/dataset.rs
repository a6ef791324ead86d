//! Observation sets and their binary dump format.
//!
//! Layout (all little-endian): the 4-byte magic `CESD`, then `u32` version,
//! `u32` N and `u32` L, followed by L records of N complex entries, each an
//! `f64` real part followed by an `f64` imaginary part.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix_core::{CMatrix, CVector};

pub const DUMP_MAGIC: [u8; 4] = *b"CESD";
pub const DUMP_VERSION: u32 = 1;

/// `L` complex `N`-vectors stored as the columns of an `N × L` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: CMatrix,
}

impl Dataset {
    pub fn new(samples: CMatrix) -> Result<Self> {
        if samples.nrows() == 0 {
            return Err(Error::Shape("dataset dimension must be >= 1".into()));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Data("dataset contains non-finite entries".into()));
        }
        Ok(Dataset { samples })
    }

    pub fn from_columns(columns: &[CVector]) -> Result<Self> {
        let Some(first) = columns.first() else {
            return Err(Error::Shape("cannot build a dataset from zero vectors".into()));
        };
        let n = first.len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("dataset vectors have inconsistent lengths".into()));
        }
        Dataset::new(CMatrix::from_columns(columns))
    }

    /// Dimension N.
    pub fn dim(&self) -> usize {
        self.samples.nrows()
    }

    /// Number of observations L.
    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn sample(&self, l: usize) -> CVector {
        self.samples.column(l).into_owned()
    }

    pub fn samples(&self) -> &CMatrix {
        &self.samples
    }

    /// Multiplies observation `l` by `factors[l]`.
    pub fn scale_each(&self, factors: &[Complex64]) -> Result<Dataset> {
        if factors.len() != self.len() {
            return Err(Error::Shape(format!("{} factors for {} observations", factors.len(), self.len())));
        }
        let mut samples = self.samples.clone();
        for (mut col, &f) in samples.column_iter_mut().zip(factors) {
            col *= f;
        }
        Dataset::new(samples)
    }

    pub fn scaled(&self, factor: Complex64) -> Result<Dataset> {
        Dataset::new(&self.samples * factor)
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let n = u32::try_from(self.dim()).map_err(std::io::Error::other)?;
        let l = u32::try_from(self.len()).map_err(std::io::Error::other)?;
        w.write_all(&DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&l.to_le_bytes())?;
        for z in self.samples.iter() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_from(mut r: impl Read) -> std::result::Result<Dataset, String> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header).map_err(|e| format!("truncated header: {e}"))?;
        if header[..4] != DUMP_MAGIC {
            return Err("bad magic, expected CESD".into());
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != DUMP_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let (n, l) = (word(8) as usize, word(12) as usize);
        let mut buf = vec![0u8; n * l * 16];
        r.read_exact(&mut buf).map_err(|e| format!("truncated body: {e}"))?;
        let entries: Vec<Complex64> = buf
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(|e| e.to_string())? != 0 {
            return Err("trailing bytes after last record".into());
        }
        Dataset::new(CMatrix::from_vec(n, l, entries)).map_err(|e| e.to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| Error::Io { path: path.to_path_buf(), source };
        let file = File::create(path).map_err(io_err)?;
        self.write_to(BufWriter::new(file)).map_err(io_err)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Dataset::read_from(BufReader::new(file)).map_err(|msg| Error::Parse { path: path.to_path_buf(), msg })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_header_layout() {
        let d = Dataset::new(CMatrix::from_element(3, 2, Complex64::new(1.5, -2.0))).unwrap();
        let mut bytes = Vec::new();
        d.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 16 + 3 * 2 * 16);
        assert_eq!(&bytes[..4], b"CESD");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..24], &1.5f64.to_le_bytes());
        assert_eq!(&bytes[24..32], &(-2.0f64).to_le_bytes());
        assert_eq!(Dataset::read_from(&bytes[..]).unwrap(), d);
    }

    #[test]
    fn rejects_corrupt_dumps() {
        assert!(Dataset::read_from(&b"CESX\x01\0\0\0\x01\0\0\0\x01\0\0\0"[..]).is_err());
        let d = Dataset::new(CMatrix::zeros(2, 2)).unwrap();
        let mut bytes = Vec::new();
        d.write_to(&mut bytes).unwrap();
        assert!(Dataset::read_from(&bytes[..bytes.len() - 1]).is_err());
        bytes.push(0);
        assert!(Dataset::read_from(&bytes[..]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = CMatrix::zeros(2, 1);
        m[(1, 0)] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(Dataset::new(m), Err(Error::Data(_))));
    }
}
