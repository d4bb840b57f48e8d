#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use vidcensor::embeddings::EmbeddingTable;
use vidcensor::media_io::{write_wav, write_y4m_as, Colorspace};
use vidcensor::media_model::{AudioTrack, Frame, FrameRate};
use vidcensor::Label;

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Two Gaussian clusters with unit per-coordinate spread whose centres are
/// `separation` apart along a random direction.
pub fn clusters(per_class: usize, dim: usize, separation: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for label in Label::BOTH {
        let shift = 0.5 * separation * label.sign();
        for _ in 0..per_class {
            points.push((0..dim).map(|j| shift * dir[j] / norm + gaussian(&mut rng)).collect());
            labels.push(label);
        }
    }
    (points, labels)
}

/// Write each point as an EMB1 pair (first `image_dim` values as image
/// rows, the rest as audio rows) plus a manifest. Every item gets `rows`
/// rows per modality whose mean is the point.
pub fn write_embedding_manifest(
    dir: &Path,
    points: &[Vec<f64>],
    labels: &[Label],
    image_dim: usize,
    rows: usize,
    seed: u64,
) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("id,label,image_emb,audio_emb\n");
    for (i, (p, l)) in points.iter().zip(labels).enumerate() {
        let expand = |part: &[f64], rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            let jitter: Vec<Vec<f64>> = (0..rows).map(|_| part.iter().map(|_| rng.gen_range(-0.1..0.1)).collect()).collect();
            (0..rows)
                .map(|r| {
                    part.iter()
                        .enumerate()
                        .map(|(j, v)| {
                            let mean_jitter = jitter.iter().map(|row| row[j]).sum::<f64>() / rows as f64;
                            v + jitter[r][j] - mean_jitter
                        })
                        .collect()
                })
                .collect()
        };
        let img = expand(&p[..image_dim], &mut rng);
        let aud = expand(&p[image_dim..], &mut rng);
        let img_name = format!("item{i:04}_img.emb");
        let aud_name = format!("item{i:04}_aud.emb");
        EmbeddingTable::from_rows(image_dim, &img).unwrap().save(&dir.join(&img_name)).unwrap();
        EmbeddingTable::from_rows(p.len() - image_dim, &aud).unwrap().save(&dir.join(&aud_name)).unwrap();
        let _ = writeln!(csv, "item{i},{},{img_name},{aud_name}", l);
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, csv).unwrap();
    path
}

/// Textured frames and a tone, written as Y4M and WAV.
pub fn write_media(
    dir: &Path,
    stem: &str,
    seconds: u32,
    fps: u32,
    size: (usize, usize),
    sample_rate: u32,
    colorspace: Colorspace,
    seed: u64,
) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = size;
    let frames: Vec<Frame> = (0..seconds * fps)
        .map(|_| {
            let px = (0..w * h * 3).map(|_| rng.gen::<u8>()).collect();
            Frame::new(w, h, px).unwrap()
        })
        .collect();
    let n = (seconds * sample_rate) as usize;
    let samples = (0..n)
        .map(|i| ((i as f64 * 0.05).sin() * 8000.0) as i16 + rng.gen_range(-200..200))
        .collect();
    let video = dir.join(format!("{stem}.y4m"));
    let audio = dir.join(format!("{stem}.wav"));
    std::fs::write(&video, write_y4m_as(FrameRate::integer(fps).unwrap(), &frames, colorspace).unwrap()).unwrap();
    std::fs::write(&audio, write_wav(&AudioTrack::new(sample_rate, samples).unwrap())).unwrap();
    (video, audio)
}
