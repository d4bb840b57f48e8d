//! The trained model file.
//!
//! Layout: magic `ICMB`, `u16` version, then sections until the end of the
//! file. A section is an 8-byte ASCII tag padded with NUL, a `u64` payload
//! length and the payload. Integers are little-endian, reals are `f64`.
//! Unknown sections are skipped.

use std::path::Path;

use crate::censor::DEFAULT_SIGMA;
use crate::embeddings::{
    AUDIO_COMPONENTS, DEFAULT_AUDIO_DIM, DEFAULT_AUDIO_WINDOW, DEFAULT_IMAGE_DIM, IMAGE_COMPONENTS,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::media_model::DEFAULT_SEGMENT_SECONDS;
use crate::pca::{PcaModel, DEFAULT_EPSILON};
use crate::svm::{KernelSpec, SvmModel, TrainConfig};

const MAGIC: &[u8; 4] = b"ICMB";
pub const BUNDLE_VERSION: u16 = 1;

const TAG_PCA_IMG: [u8; 8] = *b"PCA_IMG\0";
const TAG_PCA_AUD: [u8; 8] = *b"PCA_AUD\0";
const TAG_SVM: [u8; 8] = *b"SVM\0\0\0\0\0";
const TAG_CONFIG: [u8; 8] = *b"CONFIG\0\0";

/// Frames per second sampled from each segment for classification.
pub const SAMPLING_RATE: f64 = 1.0;
/// Longest stretch of a whole video embedded for training, in seconds.
pub const VIDEO_CAP_SECONDS: f64 = 360.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Linear,
    Rbf,
}

impl KernelKind {
    fn code(self) -> u8 {
        match self {
            KernelKind::Linear => 0,
            KernelKind::Rbf => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(KernelKind::Linear),
            1 => Ok(KernelKind::Rbf),
            _ => Err(Error::InvalidBundle(format!("unknown kernel code {code}"))),
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelKind::Linear),
            "rbf" => Ok(KernelKind::Rbf),
            _ => Err(Error::InvalidParameter(format!("unknown kernel `{s}` (expected rbf or linear)"))),
        }
    }
}

/// Settings that travel with a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub sigma: f64,
    pub segment_seconds: f64,
    pub audio_window: f64,
    pub sampling_rate: f64,
    pub image_dim: usize,
    pub audio_dim: usize,
    /// Requested PCA output sizes; fitted models may use fewer.
    pub image_components: usize,
    pub audio_components: usize,
    pub epsilon: f64,
    pub kernel: KernelKind,
    pub c: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let svm = TrainConfig::default();
        ModelConfig {
            sigma: DEFAULT_SIGMA,
            segment_seconds: DEFAULT_SEGMENT_SECONDS,
            audio_window: DEFAULT_AUDIO_WINDOW,
            sampling_rate: SAMPLING_RATE,
            image_dim: DEFAULT_IMAGE_DIM,
            audio_dim: DEFAULT_AUDIO_DIM,
            image_components: IMAGE_COMPONENTS,
            audio_components: AUDIO_COMPONENTS,
            epsilon: DEFAULT_EPSILON,
            kernel: KernelKind::Rbf,
            c: svm.c,
            tol: svm.tol,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma", self.sigma),
            ("segment length", self.segment_seconds),
            ("audio window", self.audio_window),
            ("sampling rate", self.sampling_rate),
            ("C", self.c),
            ("tolerance", self.tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon {}", self.epsilon)));
        }
        if self.image_dim == 0 || self.audio_dim == 0 {
            return Err(Error::InvalidParameter("embedding dimensions must be positive".into()));
        }
        if self.image_components == 0 || self.audio_components == 0 {
            return Err(Error::InvalidParameter("component counts must be positive".into()));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            c: self.c,
            tol: self.tol,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub pca_img: PcaModel,
    pub pca_aud: PcaModel,
    pub svm: SvmModel,
    pub config: ModelConfig,
}

impl ModelBundle {
    pub fn new(pca_img: PcaModel, pca_aud: PcaModel, svm: SvmModel, config: ModelConfig) -> Result<Self> {
        let fused = pca_img.out_dim() + pca_aud.out_dim();
        if fused != svm.dim() {
            return Err(Error::InvalidBundle(format!(
                "PCA outputs {} + {} do not match the SVM input dimension {}",
                pca_img.out_dim(),
                pca_aud.out_dim(),
                svm.dim()
            )));
        }
        if pca_img.in_dim() != config.image_dim || pca_aud.in_dim() != config.audio_dim {
            return Err(Error::InvalidBundle(format!(
                "PCA inputs {}/{} do not match the configured embedding sizes {}/{}",
                pca_img.in_dim(),
                pca_aud.in_dim(),
                config.image_dim,
                config.audio_dim
            )));
        }
        config.validate()?;
        Ok(ModelBundle {
            pca_img,
            pca_aud,
            svm,
            config,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
        for (tag, payload) in [
            (TAG_PCA_IMG, encode_pca(&self.pca_img)),
            (TAG_PCA_AUD, encode_pca(&self.pca_aud)),
            (TAG_SVM, encode_svm(&self.svm)),
            (TAG_CONFIG, encode_config(&self.config)),
        ] {
            out.extend_from_slice(&tag);
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(&payload);
        }
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::InvalidBundle("missing ICMB magic".into()));
        }
        let version = r.u16()?;
        if version != BUNDLE_VERSION {
            return Err(Error::InvalidBundle(format!("unsupported version {version}")));
        }
        let mut sections: [Option<&[u8]>; 4] = [None; 4];
        let tags = [TAG_PCA_IMG, TAG_PCA_AUD, TAG_SVM, TAG_CONFIG];
        while !r.is_empty() {
            let tag: [u8; 8] = r.take(8)?.try_into().unwrap();
            let len = usize::try_from(r.u64()?)
                .map_err(|_| Error::InvalidBundle("section length overflows".into()))?;
            let payload = r.take(len)?;
            if let Some(slot) = tags.iter().position(|t| *t == tag) {
                if sections[slot].replace(payload).is_some() {
                    return Err(Error::InvalidBundle(format!("duplicate section {}", tag_name(&tag))));
                }
            }
        }
        let section = |i: usize| {
            sections[i].ok_or_else(|| Error::InvalidBundle(format!("missing section {}", tag_name(&tags[i]))))
        };
        let pca_img = decode_pca(section(0)?)?;
        let pca_aud = decode_pca(section(1)?)?;
        let svm = decode_svm(section(2)?)?;
        let config = decode_config(section(3)?)?;
        Self::new(pca_img, pca_aud, svm, config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&bytes)
    }

    /// Atomically write the bundle to `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        super::write_atomically(&[(path, self.to_bytes())])
    }
}

fn tag_name(tag: &[u8; 8]) -> String {
    String::from_utf8_lossy(tag).trim_end_matches('\0').to_string()
}

struct ByteWriter(Vec<u8>);

impl ByteWriter {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|&v| self.f64(v));
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    fn is_empty(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::InvalidBundle(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::InvalidBundle("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn finish(&self, what: &str) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidBundle(format!("trailing bytes in {what} section")))
        }
    }
}

fn encode_pca(m: &PcaModel) -> Vec<u8> {
    let mut w = ByteWriter(Vec::new());
    w.u32(m.in_dim());
    w.u32(m.out_dim());
    w.f64(m.epsilon());
    w.f64s(m.mean());
    w.f64s(m.eigenvalues());
    w.f64s(m.components().as_slice());
    w.0
}

fn decode_pca(bytes: &[u8]) -> Result<PcaModel> {
    let mut r = ByteReader::new(bytes);
    let in_dim = r.u32()?;
    let out_dim = r.u32()?;
    let epsilon = r.f64()?;
    let mean = r.f64s(in_dim)?;
    let eigenvalues = r.f64s(out_dim)?;
    let components = r.f64s(out_dim * in_dim)?;
    r.finish("PCA")?;
    PcaModel::from_parts(mean, Matrix::from_vec(out_dim, in_dim, components), eigenvalues, epsilon)
        .map_err(|e| Error::InvalidBundle(format!("PCA section: {e}")))
}

fn encode_svm(m: &SvmModel) -> Vec<u8> {
    let mut w = ByteWriter(Vec::new());
    match m.kernel() {
        KernelSpec::Linear => {
            w.u8(KernelKind::Linear.code());
            w.f64(0.0);
        }
        KernelSpec::Rbf { gamma } => {
            w.u8(KernelKind::Rbf.code());
            w.f64(gamma);
        }
    }
    w.f64(m.c());
    w.f64(m.bias());
    w.u32(m.dual_coefs().len());
    w.u32(m.dim());
    w.f64s(m.dual_coefs());
    w.f64s(m.support_vectors().as_slice());
    w.0
}

fn decode_svm(bytes: &[u8]) -> Result<SvmModel> {
    let mut r = ByteReader::new(bytes);
    let kind = KernelKind::from_code(r.u8()?)?;
    let gamma = r.f64()?;
    let c = r.f64()?;
    let bias = r.f64()?;
    let count = r.u32()?;
    let dim = r.u32()?;
    let coefs = r.f64s(count)?;
    let sv = r.f64s(count * dim)?;
    r.finish("SVM")?;
    let kernel = match kind {
        KernelKind::Linear => KernelSpec::Linear,
        KernelKind::Rbf => KernelSpec::Rbf { gamma },
    };
    SvmModel::from_parts(kernel, Matrix::from_vec(count, dim, sv), coefs, bias, c)
        .map_err(|e| Error::InvalidBundle(format!("SVM section: {e}")))
}

fn encode_config(c: &ModelConfig) -> Vec<u8> {
    let mut w = ByteWriter(Vec::new());
    w.f64(c.sigma);
    w.f64(c.segment_seconds);
    w.f64(c.audio_window);
    w.f64(c.sampling_rate);
    w.u32(c.image_dim);
    w.u32(c.audio_dim);
    w.u32(c.image_components);
    w.u32(c.audio_components);
    w.f64(c.epsilon);
    w.u8(c.kernel.code());
    w.f64(c.c);
    w.f64(c.tol);
    w.u64(c.seed);
    w.0
}

fn decode_config(bytes: &[u8]) -> Result<ModelConfig> {
    let mut r = ByteReader::new(bytes);
    let config = ModelConfig {
        sigma: r.f64()?,
        segment_seconds: r.f64()?,
        audio_window: r.f64()?,
        sampling_rate: r.f64()?,
        image_dim: r.u32()?,
        audio_dim: r.u32()?,
        image_components: r.u32()?,
        audio_components: r.u32()?,
        epsilon: r.f64()?,
        kernel: KernelKind::from_code(r.u8()?)?,
        c: r.f64()?,
        tol: r.f64()?,
        seed: r.u64()?,
    };
    r.finish("CONFIG")?;
    config
        .validate()
        .map_err(|e| Error::InvalidBundle(format!("CONFIG section: {e}")))?;
    Ok(config)
}
