//! Image and audio embeddings from pluggable providers, and their fusion
//! into a single segment feature.

mod emb1;
mod external;
mod precomputed;
mod synthetic;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

pub use emb1::EmbeddingTable;
pub use external::ExternalProvider;
pub use precomputed::{PrecomputedProvider, INDEX_FILE};
pub use synthetic::{
    audio_content_bytes, fnv1a64, synthetic_embedding, SplitMix64, SyntheticProvider,
    FNV_OFFSET_BASIS,
};

use crate::error::{Error, Result};
use crate::media_model::{AudioTrack, Frame};
use crate::pca::PcaModel;

pub const DEFAULT_IMAGE_DIM: usize = 2048;
pub const DEFAULT_AUDIO_DIM: usize = 128;
pub const IMAGE_COMPONENTS: usize = 1024;
pub const AUDIO_COMPONENTS: usize = 128;
pub const FEATURE_DIM: usize = IMAGE_COMPONENTS + AUDIO_COMPONENTS;
/// Audio window length in seconds.
pub const DEFAULT_AUDIO_WINDOW: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    Precomputed,
    Synthetic,
    External,
}

/// Source of raw embeddings. Implementations must be deterministic and safe
/// to call from several threads.
pub trait EmbeddingProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;
    fn image_dim(&self) -> usize;
    fn audio_dim(&self) -> usize;
    /// One row per frame. `item` identifies the segment or dataset entry.
    fn image_rows(&self, item: usize, frames: &[Frame]) -> Result<Vec<Vec<f64>>>;
    /// One row per audio window.
    fn audio_rows(&self, item: usize, windows: &[AudioTrack]) -> Result<Vec<Vec<f64>>>;
}

/// Provider selection as written on the command line:
/// `synthetic`, `precomputed:<dir>` or `external:<cmd>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    Synthetic,
    Precomputed(PathBuf),
    External(String),
}

impl ProviderSpec {
    pub fn open(&self, image_dim: usize, audio_dim: usize) -> Result<Arc<dyn EmbeddingProvider>> {
        Ok(match self {
            ProviderSpec::Synthetic => Arc::new(SyntheticProvider::new(image_dim, audio_dim)),
            ProviderSpec::Precomputed(dir) => {
                Arc::new(PrecomputedProvider::open(dir, image_dim, audio_dim)?)
            }
            ProviderSpec::External(cmd) => {
                Arc::new(ExternalProvider::new(cmd.clone(), image_dim, audio_dim))
            }
        })
    }
}

impl FromStr for ProviderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "synthetic" {
            return Ok(ProviderSpec::Synthetic);
        }
        match s.split_once(':') {
            Some(("precomputed", dir)) if !dir.is_empty() => {
                Ok(ProviderSpec::Precomputed(PathBuf::from(dir)))
            }
            Some(("external", cmd)) if !cmd.trim().is_empty() => {
                Ok(ProviderSpec::External(cmd.to_string()))
            }
            _ => Err(Error::InvalidParameter(format!(
                "unknown provider `{s}` (expected synthetic, precomputed:<dir> or external:<cmd>)"
            ))),
        }
    }
}

impl fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderSpec::Synthetic => f.write_str("synthetic"),
            ProviderSpec::Precomputed(dir) => write!(f, "precomputed:{}", dir.display()),
            ProviderSpec::External(cmd) => write!(f, "external:{cmd}"),
        }
    }
}

fn check_rows(rows: &[Vec<f64>], dim: usize, expected: usize) -> Result<()> {
    if rows.len() != expected {
        return Err(Error::EmbeddingCountMismatch {
            expected,
            found: rows.len(),
        });
    }
    for row in rows {
        if row.len() != dim {
            return Err(Error::FeatureDimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFeature("provider returned a non-finite value".into()));
        }
    }
    Ok(())
}

/// One image embedding per frame.
pub fn embed_frames(
    provider: &dyn EmbeddingProvider,
    item: usize,
    frames: &[Frame],
) -> Result<Vec<Vec<f64>>> {
    if frames.is_empty() {
        return Err(Error::EmptyInput);
    }
    let rows = provider.image_rows(item, frames)?;
    check_rows(&rows, provider.image_dim(), frames.len())?;
    Ok(rows)
}

/// Cut `track` into consecutive windows of `window` seconds. A trailing
/// partial window is kept when it is at least half a window long.
pub fn audio_windows(track: &AudioTrack, window: f64) -> Result<Vec<AudioTrack>> {
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::InvalidParameter(format!("audio window must be positive, got {window}")));
    }
    let size = ((window * f64::from(track.sample_rate())).round() as usize).max(1);
    let full = track.len() / size;
    let tail = track.len() % size;
    let count = full + usize::from(tail > 0 && 2 * tail >= size);
    Ok((0..count)
        .map(|i| track.slice(i * size, ((i + 1) * size).min(track.len())))
        .collect())
}

/// One audio embedding per window; see [`audio_windows`].
pub fn embed_audio(
    provider: &dyn EmbeddingProvider,
    item: usize,
    track: &AudioTrack,
    window: f64,
) -> Result<Vec<Vec<f64>>> {
    let windows = audio_windows(track, window)?;
    if windows.is_empty() {
        return Ok(Vec::new());
    }
    let rows = provider.audio_rows(item, &windows)?;
    check_rows(&rows, provider.audio_dim(), windows.len())?;
    Ok(rows)
}

/// Arithmetic mean of `rows`; the zero vector when there are none.
pub fn mean_pool(rows: &[Vec<f64>], dim: usize) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; dim];
    for row in rows {
        if row.len() != dim {
            return Err(Error::FeatureDimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    if !rows.is_empty() {
        let n = rows.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
    }
    Ok(acc)
}

/// Mean-pooled raw embeddings of one segment or video, before PCA.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledEmbedding {
    pub image: Vec<f64>,
    pub audio: Vec<f64>,
}

impl PooledEmbedding {
    pub fn from_rows(
        frame_embs: &[Vec<f64>],
        audio_embs: &[Vec<f64>],
        image_dim: usize,
        audio_dim: usize,
    ) -> Result<Self> {
        if frame_embs.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(PooledEmbedding {
            image: mean_pool(frame_embs, image_dim)?,
            audio: mean_pool(audio_embs, audio_dim)?,
        })
    }

    /// Embed `frames` and `audio` with `provider` and pool each modality.
    pub fn extract(
        provider: &dyn EmbeddingProvider,
        item: usize,
        frames: &[Frame],
        audio: &AudioTrack,
        window: f64,
    ) -> Result<Self> {
        let img = embed_frames(provider, item, frames)?;
        let aud = embed_audio(provider, item, audio, window)?;
        Self::from_rows(&img, &aud, provider.image_dim(), provider.audio_dim())
    }

    pub fn fuse(&self, pca_img: &PcaModel, pca_aud: &PcaModel) -> Result<SegmentFeature> {
        let mut values = pca_img.transform(&self.image)?;
        let image_len = values.len();
        values.extend(pca_aud.transform(&self.audio)?);
        Ok(SegmentFeature { values, image_len })
    }
}

/// Whitened image part followed by whitened audio part.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeature {
    values: Vec<f64>,
    image_len: usize,
}

impl SegmentFeature {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn image_part(&self) -> &[f64] {
        &self.values[..self.image_len]
    }

    pub fn audio_part(&self) -> &[f64] {
        &self.values[self.image_len..]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Mean-pool both modalities, whiten each with its PCA model and concatenate.
/// With no audio embeddings the audio part is the transform of zero.
pub fn fuse(
    frame_embs: &[Vec<f64>],
    audio_embs: &[Vec<f64>],
    pca_img: &PcaModel,
    pca_aud: &PcaModel,
) -> Result<SegmentFeature> {
    PooledEmbedding::from_rows(frame_embs, audio_embs, pca_img.in_dim(), pca_aud.in_dim())?
        .fuse(pca_img, pca_aud)
}
