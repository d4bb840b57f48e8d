//! Decoded media and the timeline operations on it: splitting an asset into
//! bounded-length segments, merging them back, and sampling frames at a fixed
//! rate for embedding extraction.
//!
//! All timeline arithmetic is done on the video clock (frame count over frame
//! rate). Audio samples are assigned to segments by rounding the segment
//! boundaries to the nearest sample, so every sample lands in exactly one
//! segment and `merge_segments(split_segments(a))` reproduces `a` bit for bit.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::label::Verdict;

/// Slack used when comparing timeline positions computed in floating point.
pub const TIME_EPSILON: f64 = 1e-9;

/// Tolerance for contiguity checks when merging segments.
pub const CONTIGUITY_TOLERANCE: f64 = 1e-6;

/// Default maximum segment length in seconds.
pub const DEFAULT_SEGMENT_SECONDS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameRate {
    num: u32,
    den: u32,
}

impl FrameRate {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidMedia(format!(
                "frame rate {num}:{den} must be positive"
            )));
        }
        Ok(FrameRate { num, den })
    }

    pub fn integer(fps: u32) -> Result<Self> {
        Self::new(fps, 1)
    }

    pub fn num(self) -> u32 {
        self.num
    }

    pub fn den(self) -> u32 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }

    pub fn period(self) -> f64 {
        f64::from(self.den) / f64::from(self.num)
    }

    /// Duration covered by `frames` frames.
    pub fn duration_of(self, frames: usize) -> f64 {
        frames as f64 * f64::from(self.den) / f64::from(self.num)
    }

    /// Index of the first frame whose timestamp is at or after `t`.
    pub fn first_frame_at_or_after(self, t: f64) -> usize {
        let pos = t * f64::from(self.num) / f64::from(self.den);
        (pos - TIME_EPSILON).ceil().max(0.0) as usize
    }
}

impl fmt::Display for FrameRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.num, self.den)
    }
}

/// One decoded RGB frame, 8 bits per channel, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMedia(format!(
                "frame dimensions {width}x{height} must be positive"
            )));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::InvalidMedia(format!(
                "frame {width}x{height} needs {} bytes, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

/// Mono signed 16-bit PCM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioTrack {
    sample_rate: u32,
    samples: Vec<i16>,
}

impl AudioTrack {
    pub fn new(sample_rate: u32, samples: Vec<i16>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidMedia("sample rate must be positive".into()));
        }
        Ok(AudioTrack {
            sample_rate,
            samples,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Sample index nearest to time `t`, clamped to the track.
    pub fn sample_index_at(&self, t: f64) -> usize {
        ((t * f64::from(self.sample_rate)).round().max(0.0) as usize).min(self.samples.len())
    }

    pub fn slice(&self, from: usize, to: usize) -> AudioTrack {
        AudioTrack {
            sample_rate: self.sample_rate,
            samples: self.samples[from..to].to_vec(),
        }
    }
}

/// A decoded video with its audio track.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoAsset {
    name: Arc<str>,
    frame_rate: FrameRate,
    frames: Vec<Frame>,
    audio: AudioTrack,
}

impl VideoAsset {
    pub fn new(
        name: impl Into<Arc<str>>,
        frame_rate: FrameRate,
        frames: Vec<Frame>,
        audio: AudioTrack,
    ) -> Result<Self> {
        if let Some(first) = frames.first() {
            let dims = first.dimensions();
            if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.dimensions() != dims) {
                return Err(Error::InvalidMedia(format!(
                    "frame {i} is {}x{}, expected {}x{}",
                    f.width, f.height, dims.0, dims.1
                )));
            }
        }
        let video_secs = frame_rate.duration_of(frames.len());
        let audio_secs = audio.duration_seconds();
        if (video_secs - audio_secs).abs() > frame_rate.period() + TIME_EPSILON {
            return Err(Error::InvalidMedia(format!(
                "audio lasts {audio_secs:.6} s but video lasts {video_secs:.6} s"
            )));
        }
        Ok(VideoAsset {
            name: name.into(),
            frame_rate,
            frames,
            audio,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn frame_rate(&self) -> FrameRate {
        self.frame_rate
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn audio(&self) -> &AudioTrack {
        &self.audio
    }

    pub fn duration(&self) -> f64 {
        self.frame_rate.duration_of(self.frames.len())
    }

    pub fn into_parts(self) -> (FrameRate, Vec<Frame>, AudioTrack) {
        (self.frame_rate, self.frames, self.audio)
    }
}

/// A contiguous slice of an asset's timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub index: usize,
    pub start: f64,
    pub duration: f64,
    pub frame_rate: FrameRate,
    /// Index of this segment's first frame in the source asset.
    pub first_frame: usize,
    pub frames: Vec<Frame>,
    pub audio: AudioTrack,
    pub verdict: Option<Verdict>,
    pub source: Arc<str>,
}

impl Segment {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn is_flagged(&self) -> bool {
        matches!(self.verdict, Some(v) if v.label == crate::label::Label::Inappropriate)
    }
}

/// Anything with frames laid out on a timeline.
pub trait FrameTimeline {
    fn timeline_frames(&self) -> &[Frame];
    fn timeline_frame_rate(&self) -> FrameRate;
    fn timeline_duration(&self) -> f64;
    /// Time of the first frame relative to the start of this timeline.
    fn first_frame_offset(&self) -> f64 {
        0.0
    }
}

impl FrameTimeline for VideoAsset {
    fn timeline_frames(&self) -> &[Frame] {
        &self.frames
    }
    fn timeline_frame_rate(&self) -> FrameRate {
        self.frame_rate
    }
    fn timeline_duration(&self) -> f64 {
        self.duration()
    }
}

impl FrameTimeline for Segment {
    fn timeline_frames(&self) -> &[Frame] {
        &self.frames
    }
    fn timeline_frame_rate(&self) -> FrameRate {
        self.frame_rate
    }
    fn timeline_duration(&self) -> f64 {
        self.duration
    }
    fn first_frame_offset(&self) -> f64 {
        self.frame_rate.duration_of(self.first_frame) - self.start
    }
}

/// Cut `asset` into consecutive segments of at most `max_len` seconds. The
/// final segment is shorter when the duration is not a multiple of `max_len`.
pub fn split_segments(asset: &VideoAsset, max_len: f64) -> Result<Vec<Segment>> {
    if !(max_len.is_finite() && max_len > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "segment length must be positive, got {max_len}"
        )));
    }
    if asset.frames.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total = asset.duration();
    let count = ((total / max_len - TIME_EPSILON).ceil() as usize).max(1);
    let n_frames = asset.frames.len();
    let n_samples = asset.audio.len();

    let mut segments = Vec::with_capacity(count);
    for i in 0..count {
        let last = i + 1 == count;
        let start = i as f64 * max_len;
        let end = if last { total } else { (i + 1) as f64 * max_len };
        let f0 = asset.frame_rate.first_frame_at_or_after(start).min(n_frames);
        let f1 = if last {
            n_frames
        } else {
            asset.frame_rate.first_frame_at_or_after(end).min(n_frames)
        };
        let a0 = asset.audio.sample_index_at(start);
        let a1 = if last {
            n_samples
        } else {
            asset.audio.sample_index_at(end)
        };
        segments.push(Segment {
            index: i,
            start,
            duration: end - start,
            frame_rate: asset.frame_rate,
            first_frame: f0,
            frames: asset.frames[f0..f1].to_vec(),
            audio: asset.audio.slice(a0, a1),
            verdict: None,
            source: asset.name.clone(),
        });
    }
    Ok(segments)
}

/// Concatenate segments that tile a timeline starting at zero.
pub fn merge_segments(segments: &[Segment]) -> Result<VideoAsset> {
    let first = segments.first().ok_or(Error::EmptyInput)?;
    if first.start.abs() > CONTIGUITY_TOLERANCE {
        return Err(Error::NonContiguousSegments(format!(
            "first segment starts at {} instead of 0",
            first.start
        )));
    }
    for pair in segments.windows(2) {
        let expected = pair[0].end();
        if (pair[1].start - expected).abs() > CONTIGUITY_TOLERANCE {
            return Err(Error::NonContiguousSegments(format!(
                "segment {} starts at {} but the previous one ends at {}",
                pair[1].index, pair[1].start, expected
            )));
        }
    }

    let frame_rate = first.frame_rate;
    let sample_rate = first.audio.sample_rate();
    let dims = segments
        .iter()
        .flat_map(|s| s.frames.first())
        .map(Frame::dimensions)
        .next();
    for seg in segments {
        if seg.frame_rate != frame_rate {
            return Err(Error::IncompatibleSegments(format!(
                "segment {} has frame rate {}, expected {}",
                seg.index, seg.frame_rate, frame_rate
            )));
        }
        if seg.audio.sample_rate() != sample_rate {
            return Err(Error::IncompatibleSegments(format!(
                "segment {} has sample rate {}, expected {}",
                seg.index,
                seg.audio.sample_rate(),
                sample_rate
            )));
        }
        if let Some(dims) = dims {
            if seg.frames.iter().any(|f| f.dimensions() != dims) {
                return Err(Error::IncompatibleSegments(format!(
                    "segment {} has frames that are not {}x{}",
                    seg.index, dims.0, dims.1
                )));
            }
        }
    }

    let frames: Vec<Frame> = segments.iter().flat_map(|s| s.frames.iter().cloned()).collect();
    let samples: Vec<i16> = segments
        .iter()
        .flat_map(|s| s.audio.samples().iter().copied())
        .collect();
    VideoAsset::new(
        first.source.clone(),
        frame_rate,
        frames,
        AudioTrack::new(sample_rate, samples)?,
    )
}

/// Pick frames at `rate` frames per second from the start of the timeline up
/// to `min(duration, cap)` seconds, each being the latest decoded frame at or
/// before its timestamp.
pub fn sample_frames<T: FrameTimeline + ?Sized>(source: &T, rate: f64, cap: f64) -> Vec<Frame> {
    let frames = source.timeline_frames();
    if frames.is_empty() || !(rate > 0.0) || !(cap > 0.0) {
        return Vec::new();
    }
    let span = source.timeline_duration().min(cap);
    let wanted = (span * rate - TIME_EPSILON).ceil().max(0.0) as usize;
    let count = wanted.min(frames.len());
    let fps = source.timeline_frame_rate().as_f64();
    let offset = source.first_frame_offset();
    (0..count)
        .map(|j| {
            let t = j as f64 / rate;
            let local = ((t - offset) * fps + TIME_EPSILON).floor().max(0.0) as usize;
            frames[local.min(frames.len() - 1)].clone()
        })
        .collect()
}
