//! Split, classify, censor and merge a Y4M + WAV pair.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use rayon::prelude::*;

use super::bundle::ModelBundle;
use super::train::FittedModel;
use crate::censor::{censor_segment, CensorReport, DEFAULT_SIGMA};
use crate::embeddings::{EmbeddingProvider, PooledEmbedding};
use crate::error::{Error, Result};
use crate::label::Verdict;
use crate::media_io::{encode_payload, read_wav, rewrite_wav_samples, Y4mStream};
use crate::media_model::{merge_segments, sample_frames, split_segments, Segment, VideoAsset, DEFAULT_SEGMENT_SECONDS};

/// Decides whether a segment is inappropriate.
pub trait SegmentClassifier: Sync {
    fn classify(&self, segment: &Segment) -> Result<Verdict>;
}

impl<F> SegmentClassifier for F
where
    F: Fn(&Segment) -> Result<Verdict> + Sync,
{
    fn classify(&self, segment: &Segment) -> Result<Verdict> {
        self(segment)
    }
}

/// Classifies a segment with a trained bundle: frames sampled at the
/// bundle's rate, audio cut into windows, pooled, fused and scored.
pub struct BundleClassifier {
    model: FittedModel,
    provider: Arc<dyn EmbeddingProvider>,
    sampling_rate: f64,
    audio_window: f64,
}

impl BundleClassifier {
    pub fn new(bundle: &ModelBundle, provider: Arc<dyn EmbeddingProvider>) -> Result<Self> {
        if provider.image_dim() != bundle.pca_img.in_dim() {
            return Err(Error::FeatureDimensionMismatch {
                expected: bundle.pca_img.in_dim(),
                found: provider.image_dim(),
            });
        }
        if provider.audio_dim() != bundle.pca_aud.in_dim() {
            return Err(Error::FeatureDimensionMismatch {
                expected: bundle.pca_aud.in_dim(),
                found: provider.audio_dim(),
            });
        }
        Ok(BundleClassifier {
            model: FittedModel {
                pca_img: bundle.pca_img.clone(),
                pca_aud: bundle.pca_aud.clone(),
                svm: bundle.svm.clone(),
            },
            provider,
            sampling_rate: bundle.config.sampling_rate,
            audio_window: bundle.config.audio_window,
        })
    }
}

impl SegmentClassifier for BundleClassifier {
    fn classify(&self, segment: &Segment) -> Result<Verdict> {
        let frames = sample_frames(segment, self.sampling_rate, f64::INFINITY);
        let pooled = PooledEmbedding::extract(
            self.provider.as_ref(),
            segment.index,
            &frames,
            &segment.audio,
            self.audio_window,
        )?;
        self.model.verdict(&pooled)
    }
}

#[derive(Debug, Clone)]
pub struct CensorOptions {
    pub video: PathBuf,
    pub audio: PathBuf,
    pub out_dir: PathBuf,
    pub report: PathBuf,
    pub segment_seconds: f64,
    pub sigma: f64,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
}

impl CensorOptions {
    pub fn new(video: impl Into<PathBuf>, audio: impl Into<PathBuf>, out_dir: impl Into<PathBuf>, report: impl Into<PathBuf>) -> Self {
        CensorOptions {
            video: video.into(),
            audio: audio.into(),
            out_dir: out_dir.into(),
            report: report.into(),
            segment_seconds: DEFAULT_SEGMENT_SECONDS,
            sigma: DEFAULT_SIGMA,
            workers: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CensorOutcome {
    pub report: CensorReport,
    pub video_out: PathBuf,
    pub audio_out: PathBuf,
    pub segments: usize,
    pub flagged: usize,
}

fn output_path(dir: &Path, input: &Path) -> Result<PathBuf> {
    let name = input
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("{} has no file name", input.display())))?;
    let out = dir.join(name);
    let same = match (out.canonicalize(), input.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if same {
        return Err(Error::InvalidParameter(format!(
            "output {} would overwrite the input",
            out.display()
        )));
    }
    Ok(out)
}

/// Censor the segments `classifier` flags. Nothing is written unless the
/// whole run succeeds.
pub fn run_censor(options: &CensorOptions, classifier: &dyn SegmentClassifier) -> Result<CensorOutcome> {
    let y4m = std::fs::read(&options.video).map_err(|e| Error::io(&options.video, e))?;
    let wav = std::fs::read(&options.audio).map_err(|e| Error::io(&options.audio, e))?;
    let stream = Y4mStream::parse(&y4m)?;
    let frames = stream.decode_frames()?;
    let track = read_wav(&wav)?;
    let name = options
        .video
        .file_stem()
        .map_or_else(|| "video".to_string(), |s| s.to_string_lossy().into_owned());
    let asset = VideoAsset::new(name.as_str(), stream.header.frame_rate, frames, track)?;
    let video_out = output_path(&options.out_dir, &options.video)?;
    let audio_out = output_path(&options.out_dir, &options.audio)?;

    let segments = split_segments(&asset, options.segment_seconds)?;
    let process = |seg: &Segment| -> Result<Segment> {
        let wrap = |e: Error| Error::Segment { index: seg.index, source: Box::new(e) };
        let verdict = classifier.classify(seg).map_err(wrap)?;
        let mut seg = Segment { verdict: Some(verdict), ..seg.clone() };
        if seg.is_flagged() {
            seg = censor_segment(&seg, options.sigma).map_err(wrap)?;
        }
        Ok(seg)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
    let processed: Vec<Segment> = pool.install(|| segments.par_iter().map(process).collect::<Result<_>>())?;

    let merged = merge_segments(&processed)?;
    if merged.frames().len() != asset.frames().len() || merged.audio().len() != asset.audio().len() {
        return Err(Error::Internal("merged output changed the frame or sample count".into()));
    }

    let mut out_stream = Y4mStream {
        header: stream.header.clone(),
        payloads: Vec::with_capacity(stream.payloads.len()),
    };
    for seg in &processed {
        for (j, frame) in seg.frames.iter().enumerate() {
            let original = &stream.payloads[seg.first_frame + j];
            out_stream.payloads.push(if seg.is_flagged() {
                encode_payload(&stream.header, frame)?
            } else {
                original.clone()
            });
        }
    }
    let wav_out = rewrite_wav_samples(&wav, merged.audio())?;
    let report = CensorReport::from_segments(name, asset.duration(), &processed)?;
    let flagged = processed.iter().filter(|s| s.is_flagged()).count();
    info!("{flagged} of {} segments censored", processed.len());

    std::fs::create_dir_all(&options.out_dir).map_err(|e| Error::io(&options.out_dir, e))?;
    super::write_atomically(&[
        (video_out.as_path(), out_stream.to_bytes()),
        (audio_out.as_path(), wav_out),
        (options.report.as_path(), report.to_xml().into_bytes()),
    ])?;
    Ok(CensorOutcome {
        report,
        video_out,
        audio_out,
        segments: processed.len(),
        flagged,
    })
}
