//! Blurring and muting of flagged segments, and the scene report.

mod report;

pub use report::{CensorReport, Scene, TIME_RESOLUTION};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::label::Label;
use crate::media_model::{AudioTrack, Frame, Segment};

pub const DEFAULT_SIGMA: f64 = 10.0;

/// A normalized, sampled 1-D Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    sigma: f64,
    radius: usize,
    taps: Vec<f64>,
}

impl BlurKernel {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// `2 · radius + 1` weights, centre at `radius`.
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

/// Value of the 2-D Gaussian density at `(x, y)`.
pub fn gaussian_2d(x: f64, y: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    (-(x * x + y * y) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2)
}

/// Taps proportional to `exp(−i² / 2σ²)` for `i ∈ [−r, r]`, `r = ⌈3σ⌉`,
/// scaled to sum to one.
pub fn gaussian_kernel(sigma: f64) -> Result<BlurKernel> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let denom = 2.0 * sigma * sigma;
    let raw: Vec<f64> = (0..=2 * radius)
        .map(|k| {
            let i = k as f64 - radius as f64;
            (-(i * i) / denom).exp()
        })
        .collect();
    // sum from the tails inwards so both halves accumulate identically
    let mut sum = raw[radius];
    for i in (1..=radius).rev() {
        sum += raw[radius - i] + raw[radius + i];
    }
    let taps = raw.into_iter().map(|v| v / sum).collect();
    Ok(BlurKernel {
        sigma,
        radius,
        taps,
    })
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Separable Gaussian blur with replicated edges, horizontal pass first.
/// Intermediate values stay in floating point; the result is rounded once.
pub fn blur_frame_with(frame: &Frame, kernel: &BlurKernel) -> Frame {
    let (w, h) = frame.dimensions();
    let src = frame.pixels();
    let taps = kernel.taps();
    let r = kernel.radius() as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut horizontal = vec![0.0f64; w * h * 3];
    horizontal
        .par_chunks_mut(w * 3)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                let mut acc = [0.0f64; 3];
                for (k, t) in taps.iter().enumerate() {
                    let sx = clamp(x as isize + k as isize - r, w);
                    let p = &src[(y * w + sx) * 3..][..3];
                    for c in 0..3 {
                        acc[c] += t * f64::from(p[c]);
                    }
                }
                row[x * 3..x * 3 + 3].copy_from_slice(&acc);
            }
        });

    let mut out = vec![0u8; w * h * 3];
    out.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for (k, t) in taps.iter().enumerate() {
                let sy = clamp(y as isize + k as isize - r, h);
                let p = &horizontal[(sy * w + x) * 3..][..3];
                for c in 0..3 {
                    acc[c] += t * p[c];
                }
            }
            for c in 0..3 {
                row[x * 3 + c] = to_u8(acc[c]);
            }
        }
    });
    Frame::new(w, h, out).expect("same dimensions as the input")
}

pub fn blur_frame(frame: &Frame, sigma: f64) -> Result<Frame> {
    Ok(blur_frame_with(frame, &gaussian_kernel(sigma)?))
}

/// Silence with the same rate and length.
pub fn mute_audio(track: &AudioTrack) -> AudioTrack {
    AudioTrack::new(track.sample_rate(), vec![0; track.len()]).expect("rate already validated")
}

/// Blur every frame and silence the audio of a segment classified
/// inappropriate. Timeline fields and the verdict are kept.
pub fn censor_segment(segment: &Segment, sigma: f64) -> Result<Segment> {
    match segment.verdict {
        Some(v) if v.label == Label::Inappropriate => {}
        _ => return Err(Error::CensoringAppropriateSegment(segment.index)),
    }
    let kernel = gaussian_kernel(sigma)?;
    let frames = segment
        .frames
        .par_iter()
        .map(|f| blur_frame_with(f, &kernel))
        .collect();
    Ok(Segment {
        frames,
        audio: mute_audio(&segment.audio),
        ..segment.clone()
    })
}

/// Mean squared difference between horizontally adjacent samples.
pub fn high_frequency_energy(frame: &Frame) -> f64 {
    let (w, h) = frame.dimensions();
    if w < 2 {
        return 0.0;
    }
    let px = frame.pixels();
    let mut sum = 0.0;
    for y in 0..h {
        for x in 0..w - 1 {
            for c in 0..3 {
                let a = f64::from(px[(y * w + x) * 3 + c]);
                let b = f64::from(px[(y * w + x + 1) * 3 + c]);
                sum += (a - b) * (a - b);
            }
        }
    }
    sum / ((w - 1) * h * 3) as f64
}
