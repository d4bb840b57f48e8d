//! Content-hashed pseudo-embeddings: FNV-1a 64 seeds a SplitMix64 stream.

use super::{EmbeddingProvider, ProviderKind};
use crate::error::Result;
use crate::media_model::{AudioTrack, Frame};

pub const FNV_OFFSET_BASIS: u64 = 14_695_981_039_346_656_037;
const FNV_PRIME: u64 = 1_099_511_628_211;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET_BASIS, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[-1, 1)`, using the top 53 bits.
    pub fn next_signed_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0
    }
}

/// Deterministic vector of `dim` values in `[-1, 1)` derived from `content`.
pub fn synthetic_embedding(content: &[u8], dim: usize) -> Vec<f64> {
    let mut rng = SplitMix64::new(fnv1a64(content));
    (0..dim).map(|_| rng.next_signed_unit()).collect()
}

/// Bytes hashed for an audio window: samples as little-endian `i16`.
pub fn audio_content_bytes(samples: &[i16]) -> Vec<u8> {
    samples.iter().flat_map(|s| s.to_le_bytes()).collect()
}

/// Hashes frame pixels and audio samples instead of running a network.
#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    image_dim: usize,
    audio_dim: usize,
}

impl SyntheticProvider {
    pub fn new(image_dim: usize, audio_dim: usize) -> Self {
        SyntheticProvider {
            image_dim,
            audio_dim,
        }
    }
}

impl EmbeddingProvider for SyntheticProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Synthetic
    }

    fn image_dim(&self) -> usize {
        self.image_dim
    }

    fn audio_dim(&self) -> usize {
        self.audio_dim
    }

    fn image_rows(&self, _item: usize, frames: &[Frame]) -> Result<Vec<Vec<f64>>> {
        Ok(frames
            .iter()
            .map(|f| synthetic_embedding(f.pixels(), self.image_dim))
            .collect())
    }

    fn audio_rows(&self, _item: usize, windows: &[AudioTrack]) -> Result<Vec<Vec<f64>>> {
        Ok(windows
            .iter()
            .map(|w| synthetic_embedding(&audio_content_bytes(w.samples()), self.audio_dim))
            .collect())
    }
}
