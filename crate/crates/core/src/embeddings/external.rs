//! Embeddings computed by a child process.
//!
//! The command runs under `sh -c`, once per request. Frames arrive on its
//! standard input as a Y4M stream (4:4:4, 16-bit) and audio as a mono PCM16
//! WAV holding the windows back to back. It must print `count × dim`
//! little-endian `f32` values on standard output and exit with status 0.
//!
//! Environment passed to the child:
//! `VIDCENSOR_MODALITY` (`image` or `audio`), `VIDCENSOR_DIM`,
//! `VIDCENSOR_COUNT`, `VIDCENSOR_ITEM` and, for audio,
//! `VIDCENSOR_WINDOW_SAMPLES`.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::Mutex;

use super::{EmbeddingProvider, ProviderKind};
use crate::error::{Error, Result};
use crate::media_io::{write_wav, write_y4m};
use crate::media_model::{AudioTrack, Frame, FrameRate};

#[derive(Debug)]
pub struct ExternalProvider {
    command: String,
    image_dim: usize,
    audio_dim: usize,
    lock: Mutex<()>,
}

struct Request<'a> {
    modality: &'static str,
    item: usize,
    dim: usize,
    count: usize,
    window_samples: Option<usize>,
    input: &'a [u8],
}

impl ExternalProvider {
    pub fn new(command: impl Into<String>, image_dim: usize, audio_dim: usize) -> Self {
        ExternalProvider {
            command: command.into(),
            image_dim,
            audio_dim,
            lock: Mutex::new(()),
        }
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn run(&self, req: Request<'_>) -> Result<Vec<Vec<f64>>> {
        let context = format!("{} embeddings for item {}", req.modality, req.item);
        let fail = |message: String| Error::Provider {
            context: context.clone(),
            message,
        };
        // one child at a time; a poisoned lock only means another request failed
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());

        let mut cmd = Command::new("sh");
        cmd.arg("-c")
            .arg(&self.command)
            .env("VIDCENSOR_MODALITY", req.modality)
            .env("VIDCENSOR_DIM", req.dim.to_string())
            .env("VIDCENSOR_COUNT", req.count.to_string())
            .env("VIDCENSOR_ITEM", req.item.to_string())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(ws) = req.window_samples {
            cmd.env("VIDCENSOR_WINDOW_SAMPLES", ws.to_string());
        }
        let mut child = cmd
            .spawn()
            .map_err(|e| fail(format!("cannot start `{}`: {e}", self.command)))?;

        let mut stdin = child.stdin.take().expect("stdin is piped");
        let mut stdout = child.stdout.take().expect("stdout is piped");
        let mut stderr = child.stderr.take().expect("stderr is piped");
        let (out, err) = std::thread::scope(|s| {
            s.spawn(move || {
                // the child may exit without reading everything
                let _ = stdin.write_all(req.input);
            });
            let err_reader = s.spawn(move || {
                let mut buf = Vec::new();
                let _ = stderr.read_to_end(&mut buf);
                buf
            });
            let mut out = Vec::new();
            let read = stdout.read_to_end(&mut out);
            (read.map(|_| out), err_reader.join().unwrap_or_default())
        });
        let status = child
            .wait()
            .map_err(|e| fail(format!("waiting for child: {e}")))?;
        let out = out.map_err(|e| fail(format!("reading child output: {e}")))?;
        if !status.success() {
            let stderr = String::from_utf8_lossy(&err);
            return Err(fail(format!("`{}` exited with {status}: {}", self.command, stderr.trim())));
        }
        let expected = req.count * req.dim * 4;
        if out.len() != expected {
            return Err(fail(format!(
                "expected {expected} bytes ({} rows of {}), got {}",
                req.count,
                req.dim,
                out.len()
            )));
        }
        let values: Vec<f64> = out
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        Ok(values.chunks_exact(req.dim.max(1)).map(<[f64]>::to_vec).collect())
    }
}

impl EmbeddingProvider for ExternalProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::External
    }

    fn image_dim(&self) -> usize {
        self.image_dim
    }

    fn audio_dim(&self) -> usize {
        self.audio_dim
    }

    fn image_rows(&self, item: usize, frames: &[Frame]) -> Result<Vec<Vec<f64>>> {
        let input = write_y4m(FrameRate::integer(1)?, frames)?;
        self.run(Request {
            modality: "image",
            item,
            dim: self.image_dim,
            count: frames.len(),
            window_samples: None,
            input: &input,
        })
    }

    fn audio_rows(&self, item: usize, windows: &[AudioTrack]) -> Result<Vec<Vec<f64>>> {
        let Some(first) = windows.first() else {
            return Ok(Vec::new());
        };
        let samples: Vec<i16> = windows.iter().flat_map(|w| w.samples().iter().copied()).collect();
        let input = write_wav(&AudioTrack::new(first.sample_rate(), samples)?);
        self.run(Request {
            modality: "audio",
            item,
            dim: self.audio_dim,
            count: windows.len(),
            window_samples: Some(first.len()),
            input: &input,
        })
    }
}
