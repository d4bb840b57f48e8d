//! Embeddings read from `EMB1` files listed in `<dir>/segments.csv`.
//!
//! The index has the header `segment,image_emb,audio_emb`; paths are
//! relative to the directory. An empty `audio_emb` means no audio rows.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::emb1::EmbeddingTable;
use super::{EmbeddingProvider, ProviderKind};
use crate::error::{Error, Result};
use crate::media_model::{AudioTrack, Frame};

pub const INDEX_FILE: &str = "segments.csv";

#[derive(Debug, Deserialize)]
struct IndexRow {
    segment: usize,
    image_emb: String,
    #[serde(default)]
    audio_emb: String,
}

#[derive(Debug, Clone)]
struct Entry {
    image: PathBuf,
    audio: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct PrecomputedProvider {
    dir: PathBuf,
    entries: HashMap<usize, Entry>,
    image_dim: usize,
    audio_dim: usize,
}

impl PrecomputedProvider {
    pub fn open(dir: &Path, image_dim: usize, audio_dim: usize) -> Result<Self> {
        let index = dir.join(INDEX_FILE);
        let text = std::fs::read_to_string(&index).map_err(|e| Error::io(&index, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut entries = HashMap::new();
        let mut problems = Vec::new();
        for (line, row) in reader.deserialize::<IndexRow>().enumerate() {
            let line = line + 2;
            let row = match row {
                Ok(r) => r,
                Err(e) => {
                    problems.push(format!("{}:{line}: {e}", index.display()));
                    continue;
                }
            };
            let entry = Entry {
                image: dir.join(&row.image_emb),
                audio: (!row.audio_emb.is_empty()).then(|| dir.join(&row.audio_emb)),
            };
            if entries.insert(row.segment, entry).is_some() {
                problems.push(format!(
                    "{}:{line}: segment {} listed twice",
                    index.display(),
                    row.segment
                ));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Manifest(problems));
        }
        Ok(PrecomputedProvider {
            dir: dir.to_path_buf(),
            entries,
            image_dim,
            audio_dim,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry(&self, item: usize) -> Result<&Entry> {
        self.entries.get(&item).ok_or_else(|| Error::Provider {
            context: format!("precomputed segment {item}"),
            message: format!("no entry in {}", self.dir.join(INDEX_FILE).display()),
        })
    }

    fn rows(path: &Path, dim: usize, expected: usize) -> Result<Vec<Vec<f64>>> {
        let table = EmbeddingTable::load(path)?;
        if table.dim() != dim {
            return Err(Error::FeatureDimensionMismatch {
                expected: dim,
                found: table.dim(),
            });
        }
        if table.rows() != expected {
            return Err(Error::EmbeddingCountMismatch {
                expected,
                found: table.rows(),
            });
        }
        Ok(table.to_f64_rows())
    }
}

impl EmbeddingProvider for PrecomputedProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Precomputed
    }

    fn image_dim(&self) -> usize {
        self.image_dim
    }

    fn audio_dim(&self) -> usize {
        self.audio_dim
    }

    fn image_rows(&self, item: usize, frames: &[Frame]) -> Result<Vec<Vec<f64>>> {
        Self::rows(&self.entry(item)?.image, self.image_dim, frames.len())
    }

    fn audio_rows(&self, item: usize, windows: &[AudioTrack]) -> Result<Vec<Vec<f64>>> {
        match &self.entry(item)?.audio {
            Some(path) => Self::rows(path, self.audio_dim, windows.len()),
            None if windows.is_empty() => Ok(Vec::new()),
            None => Err(Error::EmbeddingCountMismatch {
                expected: windows.len(),
                found: 0,
            }),
        }
    }
}
