//! The `EMB1` container for precomputed embeddings.
//!
//! Layout: magic `EMB1`, `u32` dim, `u32` row count, then `rows × dim`
//! 32-bit floats. Every number is little-endian.

use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 12;

/// A dense `rows × dim` block of stored embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    values: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, values: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidEmbeddingFile("dimension must be positive".into()));
        }
        if values.len() % dim != 0 {
            return Err(Error::InvalidEmbeddingFile(format!(
                "{} values do not fill rows of {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidEmbeddingFile(format!(
                "non-finite value in row {}",
                pos / dim
            )));
        }
        Ok(EmbeddingTable { dim, values })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::FeatureDimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            values.extend(row.iter().map(|&v| v as f32));
        }
        Self::new(dim, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Rows widened to `f64`.
    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        self.values
            .chunks_exact(self.dim)
            .map(|r| r.iter().map(|&v| f64::from(v)).collect())
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.rows() as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::InvalidEmbeddingFile("missing EMB1 header".into()));
        }
        let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let expected = rows
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::InvalidEmbeddingFile("header sizes overflow".into()))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != expected {
            return Err(Error::InvalidEmbeddingFile(format!(
                "expected {expected} payload bytes for {rows}×{dim}, found {}",
                body.len()
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(dim, values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&bytes).map_err(|e| match e {
            Error::InvalidEmbeddingFile(msg) => {
                Error::InvalidEmbeddingFile(format!("{}: {msg}", path.display()))
            }
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let t = EmbeddingTable::new(2, vec![1.0, -2.5, 0.0, 3.0]).unwrap();
        let b = t.to_bytes();
        assert_eq!(&b[..4], b"EMB1");
        assert_eq!(&b[4..8], &[2, 0, 0, 0]);
        assert_eq!(&b[8..12], &[2, 0, 0, 0]);
        assert_eq!(&b[12..16], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 12 + 16);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(EmbeddingTable::parse(b"EMB2\x01\0\0\0\0\0\0\0").is_err());
        assert!(EmbeddingTable::parse(b"EMB1\x01\0\0\0\x01\0\0\0").is_err());
        assert!(EmbeddingTable::parse(b"EMB1\0\0\0\0\0\0\0\0").is_err());
        let mut b = EmbeddingTable::new(1, vec![1.0]).unwrap().to_bytes();
        b[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(EmbeddingTable::parse(&b).is_err());
        let empty = EmbeddingTable::new(3, vec![]).unwrap();
        assert_eq!(EmbeddingTable::parse(&empty.to_bytes()).unwrap().rows(), 0);
    }

    proptest! {
        #[test]
        fn roundtrip(dim in 1usize..16, rows in 0usize..8, seed in any::<u64>()) {
            let mut state = seed;
            let values: Vec<f32> = (0..dim * rows)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 40) as f32 / (1u64 << 24) as f32 - 0.5) * 1e3
                })
                .collect();
            let t = EmbeddingTable::new(dim, values).unwrap();
            prop_assert_eq!(EmbeddingTable::parse(&t.to_bytes()).unwrap(), t);
        }

        #[test]
        fn parse_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = EmbeddingTable::parse(&bytes);
        }
    }
}
