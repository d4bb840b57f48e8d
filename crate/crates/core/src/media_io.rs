//! Readers and writers for the uncompressed formats the pipeline works on:
//! YUV4MPEG2 video and RIFF/WAVE PCM-16 mono audio.
//!
//! Pixels are converted between Y'CbCr and RGB with full-range BT.601
//! coefficients, rounding half away from zero and clamping. An 8-bit Y'CbCr
//! round trip cannot represent every RGB triple, so the lossless write path
//! stores 4:4:4 planes with 16-bit samples (`C444p16`, values scaled by 256 so chroma
//! stays centered on 32768).
//! Streams are also kept as raw frame payloads ([`Y4mStream`]) so a frame
//! that is not modified can be written back byte for byte.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::media_model::{AudioTrack, Frame, FrameRate};

const Y4M_MAGIC: &[u8] = b"YUV4MPEG2";
const FRAME_MARKER: &[u8] = b"FRAME";
const MAX_HEADER_LEN: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Colorspace {
    /// 4:2:0, 8-bit. Covers the `420`, `420jpeg`, `420mpeg2` and `420paldv`
    /// tags, which share one plane layout.
    C420,
    C444,
    C444p16,
}

impl Colorspace {
    fn parse(tag: &str) -> Result<Self> {
        match tag {
            "420" | "420jpeg" | "420mpeg2" | "420paldv" => Ok(Colorspace::C420),
            "444" => Ok(Colorspace::C444),
            "444p16" => Ok(Colorspace::C444p16),
            other => Err(Error::UnsupportedY4m(format!("colorspace C{other}"))),
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Colorspace::C420 => "420jpeg",
            Colorspace::C444 => "444",
            Colorspace::C444p16 => "444p16",
        }
    }

    pub fn frame_bytes(self, width: usize, height: usize) -> usize {
        match self {
            Colorspace::C420 => width * height + 2 * width.div_ceil(2) * height.div_ceil(2),
            Colorspace::C444 => 3 * width * height,
            Colorspace::C444p16 => 6 * width * height,
        }
    }
}

impl fmt::Display for Colorspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Y4mHeader {
    pub width: usize,
    pub height: usize,
    pub frame_rate: FrameRate,
    colorspace: Colorspace,
    /// Header tokens other than W, H and F in their original order. The C
    /// token is kept in its written form (e.g. `C420mpeg2`).
    tokens: Vec<String>,
}

impl Y4mHeader {
    pub fn new(width: usize, height: usize, frame_rate: FrameRate, colorspace: Colorspace) -> Self {
        let mut tokens = vec!["Ip".to_string(), "A1:1".to_string(), colorspace.to_string()];
        if colorspace == Colorspace::C444p16 {
            tokens.push("XCOLORRANGE=FULL".to_string());
        }
        Y4mHeader {
            width,
            height,
            frame_rate,
            colorspace,
            tokens,
        }
    }

    fn parse(line: &[u8]) -> Result<Self> {
        let line = std::str::from_utf8(line).map_err(|_| Error::NotY4m)?;
        let mut tokens = line.split(' ').filter(|t| !t.is_empty());
        if tokens.next() != Some("YUV4MPEG2") {
            return Err(Error::NotY4m);
        }
        let (mut width, mut height, mut rate, mut colorspace) = (None, None, None, None);
        let mut extra = Vec::new();
        for token in tokens {
            let mut chars = token.chars();
            let key = chars.next().unwrap_or(' ');
            let value = chars.as_str();
            match key {
                'W' => width = Some(parse_dim(value, "width")?),
                'H' => height = Some(parse_dim(value, "height")?),
                'F' => {
                    let (n, d) = value
                        .split_once(':')
                        .ok_or_else(|| Error::InvalidMedia(format!("bad Y4M frame rate {value:?}")))?;
                    let n = n.parse().map_err(|_| Error::InvalidMedia(format!("bad Y4M frame rate {value:?}")))?;
                    let d = d.parse().map_err(|_| Error::InvalidMedia(format!("bad Y4M frame rate {value:?}")))?;
                    rate = Some(FrameRate::new(n, d)?);
                }
                'C' => {
                    colorspace = Some(Colorspace::parse(value)?);
                    extra.push(token.to_string());
                }
                _ => extra.push(token.to_string()),
            }
        }
        let width = width.ok_or_else(|| Error::InvalidMedia("Y4M header lacks W".into()))?;
        let height = height.ok_or_else(|| Error::InvalidMedia("Y4M header lacks H".into()))?;
        let frame_rate = rate.ok_or_else(|| Error::InvalidMedia("Y4M header lacks F".into()))?;
        Ok(Y4mHeader {
            width,
            height,
            frame_rate,
            colorspace: colorspace.unwrap_or(Colorspace::C420),
            tokens: extra,
        })
    }

    fn to_line(&self) -> String {
        let mut line = format!(
            "YUV4MPEG2 W{} H{} F{}:{}",
            self.width,
            self.height,
            self.frame_rate.num(),
            self.frame_rate.den()
        );
        for token in &self.tokens {
            line.push(' ');
            line.push_str(token);
        }
        line.push('\n');
        line
    }

    pub fn colorspace(&self) -> Colorspace {
        self.colorspace
    }

    pub fn frame_bytes(&self) -> usize {
        self.colorspace.frame_bytes(self.width, self.height)
    }
}

fn parse_dim(value: &str, what: &str) -> Result<usize> {
    match value.parse::<usize>() {
        Ok(v) if v > 0 && v <= 1 << 16 => Ok(v),
        _ => Err(Error::InvalidMedia(format!("bad Y4M {what} {value:?}"))),
    }
}

/// A parsed Y4M stream with frame payloads left encoded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Y4mStream {
    pub header: Y4mHeader,
    pub payloads: Vec<Vec<u8>>,
}

impl Y4mStream {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if !bytes.starts_with(Y4M_MAGIC) {
            return Err(Error::NotY4m);
        }
        let header_end = bytes
            .iter()
            .take(MAX_HEADER_LEN)
            .position(|&b| b == b'\n')
            .ok_or(Error::NotY4m)?;
        let header = Y4mHeader::parse(&bytes[..header_end])?;
        let frame_len = header.frame_bytes();

        let mut payloads = Vec::new();
        let mut pos = header_end + 1;
        while pos < bytes.len() {
            let rest = &bytes[pos..];
            if !rest.starts_with(FRAME_MARKER) {
                return Err(Error::TruncatedStream(format!(
                    "expected FRAME marker at byte {pos}"
                )));
            }
            let line_end = rest
                .iter()
                .take(MAX_HEADER_LEN)
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::TruncatedStream(format!("unterminated FRAME header at byte {pos}")))?;
            let start = pos + line_end + 1;
            let end = start + frame_len;
            if end > bytes.len() {
                return Err(Error::TruncatedStream(format!(
                    "frame {} needs {frame_len} bytes, {} left",
                    payloads.len(),
                    bytes.len() - start
                )));
            }
            payloads.push(bytes[start..end].to_vec());
            pos = end;
        }
        Ok(Y4mStream { header, payloads })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let line = self.header.to_line();
        let mut out =
            Vec::with_capacity(line.len() + self.payloads.len() * (6 + self.header.frame_bytes()));
        out.extend_from_slice(line.as_bytes());
        for payload in &self.payloads {
            out.extend_from_slice(b"FRAME\n");
            out.extend_from_slice(payload);
        }
        out
    }

    pub fn decode_frame(&self, index: usize) -> Result<Frame> {
        decode_payload(&self.header, &self.payloads[index])
    }

    pub fn decode_frames(&self) -> Result<Vec<Frame>> {
        (0..self.payloads.len()).map(|i| self.decode_frame(i)).collect()
    }
}

/// Parse a Y4M stream into RGB frames.
pub fn read_y4m(bytes: &[u8]) -> Result<(FrameRate, Vec<Frame>)> {
    let stream = Y4mStream::parse(bytes)?;
    let frames = stream.decode_frames()?;
    Ok((stream.header.frame_rate, frames))
}

/// Write frames losslessly (4:4:4, 16-bit samples).
pub fn write_y4m(frame_rate: FrameRate, frames: &[Frame]) -> Result<Vec<u8>> {
    write_y4m_as(frame_rate, frames, Colorspace::C444p16)
}

pub fn write_y4m_as(frame_rate: FrameRate, frames: &[Frame], colorspace: Colorspace) -> Result<Vec<u8>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::IncompatibleFrames("no frames to write".into()))?;
    let (width, height) = first.dimensions();
    if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.dimensions() != (width, height)) {
        return Err(Error::IncompatibleFrames(format!(
            "frame {i} is {}x{}, expected {width}x{height}",
            f.width(),
            f.height()
        )));
    }
    let header = Y4mHeader::new(width, height, frame_rate, colorspace);
    let payloads = frames.iter().map(|f| encode_payload(&header, f)).collect::<Result<_>>()?;
    Ok(Y4mStream { header, payloads }.to_bytes())
}

fn round_clamp(v: f64, max: f64) -> f64 {
    v.round().clamp(0.0, max)
}

pub fn rgb_to_ycbcr(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(f64::from);
    [
        0.299 * r + 0.587 * g + 0.114 * b,
        128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b,
        128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b,
    ]
}

pub fn ycbcr_to_rgb(ycc: [f64; 3]) -> [u8; 3] {
    let [y, cb, cr] = ycc;
    let cb = cb - 128.0;
    let cr = cr - 128.0;
    [
        y + 1.402 * cr,
        y - 0.344_136 * cb - 0.714_136 * cr,
        y + 1.772 * cb,
    ]
    .map(|v| round_clamp(v, 255.0) as u8)
}

fn decode_payload(header: &Y4mHeader, payload: &[u8]) -> Result<Frame> {
    let (w, h) = (header.width, header.height);
    let n = w * h;
    if payload.len() != header.frame_bytes() {
        return Err(Error::TruncatedStream(format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            header.frame_bytes()
        )));
    }
    let mut pixels = Vec::with_capacity(n * 3);
    match header.colorspace {
        Colorspace::C444 => {
            let (y, rest) = payload.split_at(n);
            let (cb, cr) = rest.split_at(n);
            for i in 0..n {
                pixels.extend(ycbcr_to_rgb([y[i], cb[i], cr[i]].map(f64::from)));
            }
        }
        Colorspace::C444p16 => {
            let sample = |plane: usize, i: usize| {
                let at = 2 * (plane * n + i);
                f64::from(u16::from_le_bytes([payload[at], payload[at + 1]])) / 256.0
            };
            for i in 0..n {
                pixels.extend(ycbcr_to_rgb([sample(0, i), sample(1, i), sample(2, i)]));
            }
        }
        Colorspace::C420 => {
            let cw = w.div_ceil(2);
            let ch = h.div_ceil(2);
            let (y, rest) = payload.split_at(n);
            let (cb, cr) = rest.split_at(cw * ch);
            for row in 0..h {
                for col in 0..w {
                    let c = (row / 2) * cw + col / 2;
                    pixels.extend(ycbcr_to_rgb([
                        f64::from(y[row * w + col]),
                        f64::from(cb[c]),
                        f64::from(cr[c]),
                    ]));
                }
            }
        }
    }
    Frame::new(w, h, pixels)
}

/// Encode an RGB frame into a payload matching `header`.
pub fn encode_payload(header: &Y4mHeader, frame: &Frame) -> Result<Vec<u8>> {
    let (w, h) = (header.width, header.height);
    if frame.dimensions() != (w, h) {
        return Err(Error::IncompatibleFrames(format!(
            "frame is {}x{}, stream is {w}x{h}",
            frame.width(),
            frame.height()
        )));
    }
    let n = w * h;
    let ycc: Vec<[f64; 3]> = frame
        .pixels()
        .chunks_exact(3)
        .map(|p| rgb_to_ycbcr([p[0], p[1], p[2]]))
        .collect();
    let mut out = Vec::with_capacity(header.frame_bytes());
    match header.colorspace {
        Colorspace::C444 => {
            for plane in 0..3 {
                out.extend(ycc.iter().map(|c| round_clamp(c[plane], 255.0) as u8));
            }
        }
        Colorspace::C444p16 => {
            for plane in 0..3 {
                for c in &ycc {
                    let v = round_clamp(c[plane] * 256.0, 65535.0) as u16;
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        Colorspace::C420 => {
            out.extend(ycc.iter().map(|c| round_clamp(c[0], 255.0) as u8));
            let cw = w.div_ceil(2);
            let ch = h.div_ceil(2);
            for plane in 1..3 {
                for cy in 0..ch {
                    for cx in 0..cw {
                        let mut sum = 0.0;
                        let mut count = 0.0;
                        for row in (2 * cy)..(2 * cy + 2).min(h) {
                            for col in (2 * cx)..(2 * cx + 2).min(w) {
                                sum += ycc[row * w + col][plane];
                                count += 1.0;
                            }
                        }
                        out.push(round_clamp(sum / count, 255.0) as u8);
                    }
                }
            }
        }
    }
    debug_assert_eq!(out.len(), header.frame_bytes());
    debug_assert!(n > 0);
    Ok(out)
}

/// Sample rate and byte range of the `data` chunk payload.
fn locate_wav(bytes: &[u8]) -> Result<(u32, Range<usize>)> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::NotWav);
    }
    let riff_size = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let limit = bytes.len().min(riff_size.saturating_add(8));

    let mut sample_rate = None;
    let mut data = None;
    let mut pos = 12;
    while pos + 8 <= limit {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= limit)
            .ok_or_else(|| {
                Error::TruncatedWav(format!(
                    "chunk {:?} declares {size} bytes past the end of the file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::TruncatedWav("fmt chunk shorter than 16 bytes".into()));
                }
                let tag = u16::from_le_bytes([body[0], body[1]]);
                let channels = u16::from_le_bytes([body[2], body[3]]);
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes([body[14], body[15]]);
                if tag != 1 {
                    return Err(Error::UnsupportedWav(format!("format code {tag}")));
                }
                if channels != 1 {
                    return Err(Error::UnsupportedWav(format!("{channels} channels")));
                }
                if bits != 16 {
                    return Err(Error::UnsupportedWav(format!("{bits} bits per sample")));
                }
                sample_rate = Some(rate);
            }
            b"data" => data = Some(body_start..body_end),
            _ => {}
        }
        pos = body_end + (size & 1);
    }

    let sample_rate = sample_rate.ok_or_else(|| Error::TruncatedWav("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::TruncatedWav("no data chunk".into()))?;
    if data.len() % 2 != 0 {
        return Err(Error::TruncatedWav("data chunk has an odd byte count".into()));
    }
    Ok((sample_rate, data))
}

/// Parse a RIFF/WAVE file holding 16-bit mono PCM.
pub fn read_wav(bytes: &[u8]) -> Result<AudioTrack> {
    let (sample_rate, data) = locate_wav(bytes)?;
    let samples = bytes[data]
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]))
        .collect();
    AudioTrack::new(sample_rate, samples)
}

/// Copy of `original` with the samples of its `data` chunk replaced by
/// those of `track`. Every other byte, including extra chunks, is kept.
pub fn rewrite_wav_samples(original: &[u8], track: &AudioTrack) -> Result<Vec<u8>> {
    let (sample_rate, data) = locate_wav(original)?;
    if sample_rate != track.sample_rate() || data.len() != 2 * track.len() {
        return Err(Error::IncompatibleFrames(format!(
            "track of {} samples at {} Hz does not fit a data chunk of {} samples at {sample_rate} Hz",
            track.len(),
            track.sample_rate(),
            data.len() / 2
        )));
    }
    let mut out = original.to_vec();
    for (dst, s) in out[data].chunks_exact_mut(2).zip(track.samples()) {
        dst.copy_from_slice(&s.to_le_bytes());
    }
    Ok(out)
}

pub fn write_wav(track: &AudioTrack) -> Vec<u8> {
    let data_len = (track.len() * 2) as u32;
    let rate = track.sample_rate();
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in track.samples() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_frames(count: usize, w: usize, h: usize, seed: u64) -> Vec<Frame> {
        let mut state = seed;
        (0..count)
            .map(|_| {
                let pixels = (0..w * h * 3)
                    .map(|_| {
                        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        (state >> 56) as u8
                    })
                    .collect();
                Frame::new(w, h, pixels).unwrap()
            })
            .collect()
    }

    #[test]
    fn reads_minimal_444_stream() {
        let mut bytes = b"YUV4MPEG2 W2 H2 F10:1 C444\nFRAME\n".to_vec();
        bytes.extend(std::iter::repeat(128u8).take(12));
        let (rate, frames) = read_y4m(&bytes).unwrap();
        assert_eq!(rate, FrameRate::integer(10).unwrap());
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].dimensions(), (2, 2));
        assert!(frames[0].pixels().iter().all(|&p| p == 128));
    }

    #[test]
    fn missing_frame_marker_is_truncation() {
        let mut bytes = b"YUV4MPEG2 W2 H2 F10:1 C444\nFRAME\n".to_vec();
        bytes.extend(std::iter::repeat(128u8).take(12));
        bytes.extend(std::iter::repeat(128u8).take(12));
        assert!(matches!(read_y4m(&bytes), Err(Error::TruncatedStream(_))));

        let mut short = b"YUV4MPEG2 W2 H2 F10:1 C444\nFRAME\n".to_vec();
        short.extend([1, 2, 3]);
        assert!(matches!(read_y4m(&short), Err(Error::TruncatedStream(_))));
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(read_y4m(b"RIFF...."), Err(Error::NotY4m)));
        assert!(matches!(read_y4m(b""), Err(Error::NotY4m)));
    }

    #[test]
    fn write_header_and_roundtrip() {
        let frames = random_frames(3, 4, 4, 9);
        let bytes = write_y4m(FrameRate::integer(25).unwrap(), &frames).unwrap();
        assert!(bytes.starts_with(b"YUV4MPEG2 W4 H4"));
        let (rate, back) = read_y4m(&bytes).unwrap();
        assert_eq!(rate.as_f64(), 25.0);
        assert_eq!(back, frames);

        let one = random_frames(1, 2, 2, 1);
        let bytes = write_y4m(FrameRate::integer(1).unwrap(), &one).unwrap();
        assert!(bytes.starts_with(b"YUV4MPEG2 W2 H2"));
    }

    #[test]
    fn write_rejects_empty_and_mixed() {
        let rate = FrameRate::integer(1).unwrap();
        assert!(matches!(write_y4m(rate, &[]), Err(Error::IncompatibleFrames(_))));
        let mut frames = random_frames(1, 2, 2, 1);
        frames.extend(random_frames(1, 3, 2, 2));
        assert!(matches!(write_y4m(rate, &frames), Err(Error::IncompatibleFrames(_))));
    }

    #[test]
    fn sixteen_bit_path_is_lossless_for_every_color() {
        for r in 0..=255u8 {
            for g in 0..=255u8 {
                for b in 0..=255u8 {
                    let ycc = rgb_to_ycbcr([r, g, b]);
                    let q = ycc.map(|v| round_clamp(v * 256.0, 65535.0) / 256.0);
                    assert_eq!(ycbcr_to_rgb(q), [r, g, b]);
                }
            }
        }
    }

    #[test]
    fn gray_point() {
        assert_eq!(ycbcr_to_rgb([128.0, 128.0, 128.0]), [128, 128, 128]);
        assert_eq!(rgb_to_ycbcr([128, 128, 128]).map(|v| v.round()), [128.0; 3]);
    }

    #[test]
    fn eight_bit_and_420_paths_are_close() {
        let frames = random_frames(2, 5, 3, 77);
        let rate = FrameRate::new(30000, 1001).unwrap();
        let (_, back) = read_y4m(&write_y4m_as(rate, &frames, Colorspace::C444).unwrap()).unwrap();
        for (a, b) in frames.iter().zip(&back) {
            for (x, y) in a.pixels().iter().zip(b.pixels()) {
                assert!((i32::from(*x) - i32::from(*y)).abs() <= 2);
            }
        }
        let flat = vec![Frame::filled(5, 3, [10, 200, 90]).unwrap()];
        let bytes = write_y4m_as(rate, &flat, Colorspace::C420).unwrap();
        assert!(bytes.starts_with(b"YUV4MPEG2 W5 H3 F30000:1001"));
        let (_, back) = read_y4m(&bytes).unwrap();
        for (x, y) in flat[0].pixels().iter().zip(back[0].pixels()) {
            assert!((i32::from(*x) - i32::from(*y)).abs() <= 2);
        }
    }

    #[test]
    fn stream_bytes_survive_reparse() {
        let mut bytes = b"YUV4MPEG2 W3 H2 F24:1 Ip A0:0 C420mpeg2 XYSCSS=420MPEG2\n".to_vec();
        for k in 0..2u8 {
            bytes.extend_from_slice(b"FRAME\n");
            bytes.extend((0..(6 + 2 * 2)).map(|i| i as u8 * 13 + k));
        }
        let stream = Y4mStream::parse(&bytes).unwrap();
        assert_eq!(stream.header.colorspace(), Colorspace::C420);
        assert_eq!(stream.to_bytes(), bytes);
    }

    #[test]
    fn unsupported_colorspace() {
        let bytes = b"YUV4MPEG2 W2 H2 F10:1 Cmono\n";
        assert!(matches!(read_y4m(bytes), Err(Error::UnsupportedY4m(_))));
    }

    #[test]
    fn silent_second() {
        let track = AudioTrack::new(8000, vec![0; 8000]).unwrap();
        let back = read_wav(&write_wav(&track)).unwrap();
        assert_eq!(back.duration_seconds(), 1.0);
        assert_eq!(back, track);
    }

    #[test]
    fn float_wav_is_unsupported() {
        let track = AudioTrack::new(8000, vec![1, 2, 3]).unwrap();
        let mut bytes = write_wav(&track);
        bytes[20] = 3;
        assert!(matches!(read_wav(&bytes), Err(Error::UnsupportedWav(_))));
        let mut stereo = write_wav(&track);
        stereo[22] = 2;
        assert!(matches!(read_wav(&stereo), Err(Error::UnsupportedWav(_))));
        assert!(matches!(read_wav(b"RIFX\0\0\0\0WAVE"), Err(Error::NotWav)));
    }

    #[test]
    fn skips_unknown_chunks() {
        let track = AudioTrack::new(16000, vec![-5, 5, i16::MIN, i16::MAX]).unwrap();
        let plain = write_wav(&track);
        let mut bytes = plain[..36].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(b"abc\0");
        bytes.extend_from_slice(&plain[36..]);
        let riff = (bytes.len() - 8) as u32;
        bytes[4..8].copy_from_slice(&riff.to_le_bytes());
        assert_eq!(read_wav(&bytes).unwrap(), track);

        let quiet = AudioTrack::new(16000, vec![-5, 0, 0, i16::MAX]).unwrap();
        let rewritten = rewrite_wav_samples(&bytes, &quiet).unwrap();
        assert_eq!(read_wav(&rewritten).unwrap(), quiet);
        let changed: Vec<usize> = (0..bytes.len()).filter(|&i| bytes[i] != rewritten[i]).collect();
        assert!(changed.iter().all(|&i| (bytes.len() - 6..bytes.len() - 2).contains(&i)));
        let short = AudioTrack::new(16000, vec![0; 3]).unwrap();
        assert!(rewrite_wav_samples(&bytes, &short).is_err());
    }

    #[test]
    fn oversized_data_chunk_is_truncation() {
        let track = AudioTrack::new(8000, vec![7; 10]).unwrap();
        let mut bytes = write_wav(&track);
        bytes[40..44].copy_from_slice(&1000u32.to_le_bytes());
        assert!(matches!(read_wav(&bytes), Err(Error::TruncatedWav(_))));
    }

    proptest! {
        #[test]
        fn wav_roundtrip(rate in 1u32..192_000, samples in proptest::collection::vec(any::<i16>(), 0..500)) {
            let track = AudioTrack::new(rate, samples).unwrap();
            let bytes = write_wav(&track);
            prop_assert_eq!(read_wav(&bytes).unwrap(), track);
            prop_assert_eq!(write_wav(&read_wav(&bytes).unwrap()), bytes);
        }

        #[test]
        fn y4m_roundtrip(w in 1usize..7, h in 1usize..7, count in 1usize..4, seed in any::<u64>(), num in 1u32..120, den in 1u32..1002) {
            let frames = random_frames(count, w, h, seed);
            let rate = FrameRate::new(num, den).unwrap();
            let bytes = write_y4m(rate, &frames).unwrap();
            let (back_rate, back) = read_y4m(&bytes).unwrap();
            prop_assert_eq!(back_rate, rate);
            prop_assert_eq!(back, frames);
        }

        #[test]
        fn mutated_inputs_never_panic(
            seed in any::<u64>(),
            edits in proptest::collection::vec((any::<usize>(), any::<u8>()), 1..8),
            cut in any::<usize>(),
        ) {
            let frames = random_frames(2, 3, 3, seed);
            let mut y4m = write_y4m(FrameRate::integer(5).unwrap(), &frames).unwrap();
            let mut wav = write_wav(&AudioTrack::new(8000, vec![3; 20]).unwrap());
            for (at, value) in &edits {
                let i = at % y4m.len();
                y4m[i] = *value;
                let j = at % wav.len();
                wav[j] = *value;
            }
            let _ = read_y4m(&y4m);
            let _ = read_wav(&wav);
            let _ = read_y4m(&y4m[..cut % (y4m.len() + 1)]);
            let _ = read_wav(&wav[..cut % (wav.len() + 1)]);
        }
    }
}
