//! Dataset manifests.
//!
//! UTF-8 CSV with the header `id,label,image_emb,audio_emb` (precomputed
//! `EMB1` files) or `id,label,video,audio` (Y4M and WAV files). Paths are
//! relative to the manifest. `audio_emb` may be left empty.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::bundle::VIDEO_CAP_SECONDS;
use crate::embeddings::{EmbeddingProvider, EmbeddingTable, PooledEmbedding};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::media_io::{read_wav, read_y4m};
use crate::media_model::{sample_frames, AudioTrack, VideoAsset};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EntrySource {
    Embeddings { image: PathBuf, audio: Option<PathBuf> },
    Media { video: PathBuf, audio: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub label: Label,
    pub source: EntrySource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifestKind {
    Embeddings,
    Media,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub kind: ManifestKind,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Read and check a manifest. Every bad row is reported, not just the
    /// first one.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base, &path.display().to_string())
    }

    /// Parse manifest text, resolving paths against `base`.
    pub fn parse(text: &str, base: &Path, origin: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Manifest(vec![format!("{origin}: {e}")]))?
            .iter()
            .map(str::to_ascii_lowercase)
            .collect();
        let kind = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["id", "label", "image_emb", "audio_emb"] => ManifestKind::Embeddings,
            ["id", "label", "video", "audio"] => ManifestKind::Media,
            _ => {
                return Err(Error::Manifest(vec![format!(
                    "{origin}: header must be `id,label,image_emb,audio_emb` or `id,label,video,audio`, found `{}`",
                    header.join(",")
                )]))
            }
        };

        let mut problems = Vec::new();
        let mut entries = Vec::new();
        let mut ids = HashSet::new();
        for (n, record) in reader.records().enumerate() {
            let line = n + 2;
            let at = |msg: String| format!("{origin}:{line}: {msg}");
            let record = match record {
                Ok(r) => r,
                Err(e) => {
                    problems.push(at(e.to_string()));
                    continue;
                }
            };
            if record.len() != 4 {
                problems.push(at(format!("expected 4 fields, found {}", record.len())));
                continue;
            }
            let id = record[0].to_string();
            if id.is_empty() {
                problems.push(at("empty id".into()));
            } else if !ids.insert(id.clone()) {
                problems.push(at(format!("duplicate id `{id}`")));
            }
            let label = match record[1].parse::<Label>() {
                Ok(l) => Some(l),
                Err(_) => {
                    problems.push(at(format!("unknown label `{}`", &record[1])));
                    None
                }
            };
            let mut file = |field: &str, name: &str, optional: bool| -> Option<PathBuf> {
                if field.is_empty() {
                    if !optional {
                        problems.push(at(format!("missing {name} path")));
                    }
                    return None;
                }
                let p = base.join(field);
                if !p.is_file() {
                    problems.push(at(format!("{name} file {} does not exist", p.display())));
                }
                Some(p)
            };
            let source = match kind {
                ManifestKind::Embeddings => {
                    let image = file(&record[2], "image_emb", false);
                    let audio = file(&record[3], "audio_emb", true);
                    image.map(|image| EntrySource::Embeddings { image, audio })
                }
                ManifestKind::Media => {
                    let video = file(&record[2], "video", false);
                    let audio = file(&record[3], "audio", false);
                    video.zip(audio).map(|(video, audio)| EntrySource::Media { video, audio })
                }
            };
            if let (Some(label), Some(source)) = (label, source) {
                entries.push(ManifestEntry { id, label, source });
            }
        }
        if !problems.is_empty() {
            return Err(Error::Manifest(problems));
        }
        if entries.is_empty() {
            return Err(Error::Manifest(vec![format!("{origin}: no entries")]));
        }
        Ok(DatasetManifest { kind, entries })
    }

    pub fn labels(&self) -> Vec<Label> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// How raw media entries are turned into embeddings.
pub struct MediaEmbedding<'a> {
    pub provider: &'a dyn EmbeddingProvider,
    pub sampling_rate: f64,
    pub audio_window: f64,
}

/// Pooled raw embeddings for every entry, in manifest order. Failures are
/// collected per entry.
pub fn load_pooled(manifest: &DatasetManifest, media: Option<&MediaEmbedding<'_>>) -> Result<Vec<PooledEmbedding>> {
    let results: Vec<Result<PooledEmbedding>> = manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| match &e.source {
            EntrySource::Embeddings { image, audio } => pooled_from_files(image, audio.as_deref()),
            EntrySource::Media { video, audio } => {
                let media = media.ok_or_else(|| {
                    Error::InvalidParameter("media entries need an embedding provider".into())
                })?;
                pooled_from_media(i, &e.id, video, audio, media)
            }
        })
        .collect();

    let mut pooled = Vec::with_capacity(results.len());
    let mut problems = Vec::new();
    for (entry, r) in manifest.entries.iter().zip(results) {
        match r {
            Ok(p) => pooled.push(p),
            Err(e) => problems.push(format!("entry `{}`: {e}", entry.id)),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Manifest(problems));
    }
    let (img, aud) = (pooled[0].image.len(), pooled[0].audio.len());
    for (entry, p) in manifest.entries.iter().zip(&pooled) {
        if p.image.len() != img || (p.audio.len() != aud && !p.audio.is_empty()) {
            problems.push(format!(
                "entry `{}`: embedding sizes {}/{} differ from {img}/{aud}",
                entry.id,
                p.image.len(),
                p.audio.len()
            ));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Manifest(problems));
    }
    // entries without audio pool to the zero vector of the common size
    let aud = pooled.iter().map(|p| p.audio.len()).max().unwrap_or(0);
    for p in &mut pooled {
        if p.audio.is_empty() {
            p.audio = vec![0.0; aud];
        }
    }
    Ok(pooled)
}

fn pooled_from_files(image: &Path, audio: Option<&Path>) -> Result<PooledEmbedding> {
    let img = EmbeddingTable::load(image)?;
    if img.rows() == 0 {
        return Err(Error::InvalidEmbeddingFile(format!("{} has no rows", image.display())));
    }
    let aud = audio.map(EmbeddingTable::load).transpose()?;
    let audio_dim = aud.as_ref().map_or(0, EmbeddingTable::dim);
    let audio_rows = aud.map(|t| t.to_f64_rows()).unwrap_or_default();
    PooledEmbedding::from_rows(&img.to_f64_rows(), &audio_rows, img.dim(), audio_dim)
}

fn pooled_from_media(
    item: usize,
    id: &str,
    video: &Path,
    audio: &Path,
    media: &MediaEmbedding<'_>,
) -> Result<PooledEmbedding> {
    let y4m = std::fs::read(video).map_err(|e| Error::io(video, e))?;
    let wav = std::fs::read(audio).map_err(|e| Error::io(audio, e))?;
    let (rate, frames) = read_y4m(&y4m)?;
    let track = read_wav(&wav)?;
    let asset = VideoAsset::new(id, rate, frames, track)?;
    let sampled = sample_frames(&asset, media.sampling_rate, VIDEO_CAP_SECONDS);
    let capped = capped_audio(asset.audio(), VIDEO_CAP_SECONDS);
    PooledEmbedding::extract(media.provider, item, &sampled, &capped, media.audio_window)
}

fn capped_audio(track: &AudioTrack, seconds: f64) -> AudioTrack {
    let end = track.sample_index_at(seconds).min(track.len());
    track.slice(0, end)
}
