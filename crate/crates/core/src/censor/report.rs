//! The XML timeline of censored scenes.
//!
//! ```xml
//! <?xml version="1.0" encoding="UTF-8"?>
//! <censorship video="NAME" duration="60.000">
//!   <scene start="10.000" duration="10.000" score="1.250"/>
//! </censorship>
//! ```

use std::fmt::Write as _;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use crate::error::{Error, Result};
use crate::media_model::{Segment, CONTIGUITY_TOLERANCE};

/// Times are written in whole milliseconds.
pub const TIME_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scene {
    pub start: f64,
    pub duration: f64,
    pub score: f64,
}

impl Scene {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensorReport {
    pub video_name: String,
    pub total_duration: f64,
    /// Sorted by start, non-overlapping.
    pub scenes: Vec<Scene>,
}

impl CensorReport {
    pub fn new(video_name: impl Into<String>, total_duration: f64, scenes: Vec<Scene>) -> Result<Self> {
        let report = CensorReport {
            video_name: video_name.into(),
            total_duration,
            scenes,
        };
        report.validate()?;
        Ok(report)
    }

    /// One scene per run of adjacent flagged segments, scored with the
    /// largest decision value in the run.
    pub fn from_segments(video_name: impl Into<String>, total_duration: f64, segments: &[Segment]) -> Result<Self> {
        let mut scenes: Vec<Scene> = Vec::new();
        let mut last_index = None;
        for seg in segments.iter().filter(|s| s.is_flagged()) {
            let score = seg.verdict.map_or(0.0, |v| v.score);
            let adjacent = last_index == Some(seg.index.wrapping_sub(1));
            match scenes.last_mut() {
                Some(scene) if adjacent && (scene.end() - seg.start).abs() <= CONTIGUITY_TOLERANCE => {
                    scene.duration = seg.end() - scene.start;
                    scene.score = scene.score.max(score);
                }
                _ => scenes.push(Scene {
                    start: seg.start,
                    duration: seg.duration,
                    score,
                }),
            }
            last_index = Some(seg.index);
        }
        Self::new(video_name, total_duration, scenes)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidReport(msg));
        if !(self.total_duration.is_finite() && self.total_duration >= 0.0) {
            return bad(format!("duration {} is not a non-negative number", self.total_duration));
        }
        let mut prev_end = 0.0f64;
        for (i, s) in self.scenes.iter().enumerate() {
            if !(s.start.is_finite() && s.duration.is_finite() && s.score.is_finite()) {
                return bad(format!("scene {i} has a non-finite field"));
            }
            if s.start < 0.0 || s.duration < 0.0 {
                return bad(format!("scene {i} has a negative time"));
            }
            if s.start < prev_end - TIME_RESOLUTION * 1e-3 {
                return bad(format!("scene {i} overlaps the previous scene or is out of order"));
            }
            if s.end() > self.total_duration + TIME_RESOLUTION {
                return bad(format!(
                    "scene {i} ends at {:.3}, after the video ({:.3})",
                    s.end(),
                    self.total_duration
                ));
            }
            prev_end = s.end();
        }
        Ok(())
    }

    pub fn to_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = write!(
            out,
            "<censorship video=\"{}\" duration=\"{:.3}\"",
            escape(self.video_name.as_str()),
            self.total_duration
        );
        if self.scenes.is_empty() {
            out.push_str("/>\n");
            return out;
        }
        out.push_str(">\n");
        for s in &self.scenes {
            let _ = writeln!(
                out,
                "  <scene start=\"{:.3}\" duration=\"{:.3}\" score=\"{:.3}\"/>",
                s.start, s.duration, s.score
            );
        }
        out.push_str("</censorship>\n");
        out
    }

    pub fn parse_xml(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::MalformedXml(format!("not UTF-8: {e}")))?;
        let mut reader = Reader::from_str(text);
        reader.config_mut().trim_text(true);
        let malformed = |msg: String| Error::MalformedXml(msg);

        let mut root: Option<(String, f64)> = None;
        let mut open = false;
        let mut closed = false;
        let mut scenes = Vec::new();
        loop {
            let event = reader
                .read_event()
                .map_err(|e| malformed(format!("at byte {}: {e}", reader.error_position())))?;
            match event {
                Event::Decl(_) | Event::Comment(_) if root.is_none() => {}
                Event::Comment(_) => {}
                Event::Start(ref e) | Event::Empty(ref e) if root.is_none() => {
                    expect_name(e, "censorship")?;
                    let attrs = attributes(e, &["video", "duration"])?;
                    root = Some((attrs[0].clone(), number(&attrs[1], "duration")?));
                    open = matches!(event, Event::Start(_));
                    closed = !open;
                }
                Event::Empty(e) if open => {
                    expect_name(&e, "scene")?;
                    let attrs = attributes(&e, &["start", "duration", "score"])?;
                    scenes.push(Scene {
                        start: number(&attrs[0], "start")?,
                        duration: number(&attrs[1], "duration")?,
                        score: number(&attrs[2], "score")?,
                    });
                }
                Event::Start(e) if open => {
                    expect_name(&e, "scene")?;
                    return Err(malformed("scene elements must be empty".into()));
                }
                Event::End(e) if open => {
                    if e.name().as_ref() != b"censorship" {
                        return Err(malformed("unexpected closing tag".into()));
                    }
                    open = false;
                    closed = true;
                }
                Event::Eof => break,
                Event::Text(t) if t.iter().all(u8::is_ascii_whitespace) => {}
                other => return Err(malformed(format!("unexpected content {other:?}"))),
            }
        }
        let Some((video_name, total_duration)) = root else {
            return Err(malformed("no censorship element".into()));
        };
        if !closed {
            return Err(malformed("censorship element is not closed".into()));
        }
        Self::new(video_name, total_duration, scenes)
    }
}

fn expect_name(e: &BytesStart<'_>, name: &str) -> Result<()> {
    if e.name().as_ref() == name.as_bytes() {
        Ok(())
    } else {
        Err(Error::MalformedXml(format!(
            "expected <{name}>, found <{}>",
            String::from_utf8_lossy(e.name().as_ref())
        )))
    }
}

/// Values of exactly the attributes in `names`, in that order.
fn attributes(e: &BytesStart<'_>, names: &[&str]) -> Result<Vec<String>> {
    let mut values: Vec<Option<String>> = vec![None; names.len()];
    for attr in e.attributes() {
        let attr = attr.map_err(|err| Error::MalformedXml(err.to_string()))?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let Some(pos) = names.iter().position(|n| *n == key) else {
            return Err(Error::MalformedXml(format!("unexpected attribute `{key}`")));
        };
        if values[pos].is_some() {
            return Err(Error::MalformedXml(format!("duplicate attribute `{key}`")));
        }
        let value = attr
            .unescape_value()
            .map_err(|err| Error::MalformedXml(err.to_string()))?;
        values[pos] = Some(value.into_owned());
    }
    names
        .iter()
        .zip(values)
        .map(|(n, v)| v.ok_or_else(|| Error::MalformedXml(format!("missing attribute `{n}`"))))
        .collect()
}

fn number(text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::MalformedXml(format!("{what} `{text}` is not a number")))
}
