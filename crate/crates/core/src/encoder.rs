//! Feature encoder interface and a deterministic histogram encoder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BBox, BoxKind, ImageFrame, Modality, ModalityDims};

/// Side of the square grayscale thumbnail each crop is resized to.
pub const THUMB: usize = 16;
/// Horizontal bands per thumbnail, each with its own histogram.
pub const BANDS: usize = 4;
pub const BINS: usize = 16;
/// Length of the concatenated band histograms.
pub const HIST_LEN: usize = BANDS * BINS;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub name: String,
    pub modality: Modality,
    pub output_dim: usize,
}

impl EncoderSpec {
    pub fn validate(&self, dims: &ModalityDims) -> Result<()> {
        let expected = dims.get(self.modality);
        if self.output_dim != expected {
            return Err(Error::ConfigInvalid(format!(
                "encoder {} outputs {} values but {} templates have dim {}",
                self.name, self.output_dim, self.modality, expected
            )));
        }
        Ok(())
    }
}

/// Maps a tracked sequence (frames plus one box per frame) to a feature vector.
pub trait Encoder: Send + Sync {
    fn spec(&self) -> &EncoderSpec;

    fn encode(&self, frames: &[ImageFrame], track: &[BBox]) -> Result<Vec<f64>>;
}

/// Banded intensity histograms of a 16x16 thumbnail, averaged over frames
/// and lifted to `output_dim` by a seeded Gaussian projection.
#[derive(Debug, Clone)]
pub struct ToyEncoder {
    spec: EncoderSpec,
    /// `output_dim x HIST_LEN`, row-major.
    projection: Vec<f64>,
}

impl ToyEncoder {
    pub fn new(modality: Modality, output_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xE4C0_DE00 + modality.tag() as u64));
        let projection = (0..output_dim * HIST_LEN)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Self {
            spec: EncoderSpec {
                name: format!("toy-{}", modality.name()),
                modality,
                output_dim,
            },
            projection,
        }
    }

    pub fn project(&self, hist: &[f64]) -> Vec<f64> {
        assert_eq!(hist.len(), HIST_LEN);
        self.projection
            .chunks_exact(HIST_LEN)
            .map(|row| row.iter().zip(hist).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl Encoder for ToyEncoder {
    fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    fn encode(&self, frames: &[ImageFrame], track: &[BBox]) -> Result<Vec<f64>> {
        Ok(self.project(&sequence_histogram(frames, track, self.spec.modality)?))
    }
}

/// One-shot form of [`ToyEncoder`].
pub fn toy_encode(
    frames: &[ImageFrame],
    track: &[BBox],
    modality: Modality,
    output_dim: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    ToyEncoder::new(modality, output_dim, seed).encode(frames, track)
}

/// Region of a tracked box that a modality looks at. Face boxes are used as
/// is; for body boxes the face is the top quarter and gait the lower half.
pub fn modality_region(bbox: &BBox, modality: Modality) -> (f64, f64, f64, f64) {
    let (x0, y0, x1, y1) = (bbox.x_min, bbox.y_min, bbox.x_max, bbox.y_max);
    let h = y1 - y0;
    match (modality, bbox.kind) {
        (_, BoxKind::Face) | (Modality::Body, _) => (x0, y0, x1, y1),
        (Modality::Face, BoxKind::Body) => (x0, y0, x1, y0 + 0.25 * h),
        (Modality::Gait, BoxKind::Body) => (x0, y0 + 0.5 * h, x1, y1),
    }
}

fn sample_clamped(img: &ImageFrame, x: f64, y: f64) -> f64 {
    let w = img.width() as usize;
    let h = img.height() as usize;
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let d = img.data();
    let p = |xx: usize, yy: usize| d[yy * w + xx];
    (1.0 - fy) * ((1.0 - fx) * p(x0, y0) + fx * p(x1, y0)) + fy * ((1.0 - fx) * p(x0, y1) + fx * p(x1, y1))
}

/// Area-averaged 16x16 grayscale thumbnail of a region (4x4 bilinear
/// supersamples per output pixel).
pub fn thumbnail(frame: &ImageFrame, region: (f64, f64, f64, f64)) -> Vec<f64> {
    const SS: usize = 4;
    let gray = frame.to_gray();
    let (x0, y0, x1, y1) = region;
    let (cw, ch) = ((x1 - x0) / THUMB as f64, (y1 - y0) / THUMB as f64);
    let mut out = vec![0.0; THUMB * THUMB];
    for ty in 0..THUMB {
        for tx in 0..THUMB {
            let mut acc = 0.0;
            for sy in 0..SS {
                for sx in 0..SS {
                    // pixel centers sit at integer coordinates
                    let x = x0 + cw * (tx as f64 + (sx as f64 + 0.5) / SS as f64) - 0.5;
                    let y = y0 + ch * (ty as f64 + (sy as f64 + 0.5) / SS as f64) - 0.5;
                    acc += sample_clamped(&gray, x, y);
                }
            }
            out[ty * THUMB + tx] = acc / (SS * SS) as f64;
        }
    }
    out
}

/// Per-band 16-bin histograms of a thumbnail, each band summing to 1.
pub fn band_histogram(thumb: &[f64]) -> Vec<f64> {
    let rows = THUMB / BANDS;
    let mut hist = vec![0.0; HIST_LEN];
    for (i, v) in thumb.iter().enumerate() {
        let band = (i / THUMB) / rows;
        let bin = ((v.clamp(0.0, 1.0) * BINS as f64) as usize).min(BINS - 1);
        hist[band * BINS + bin] += 1.0;
    }
    let per_band = (rows * THUMB) as f64;
    hist.iter_mut().for_each(|h| *h /= per_band);
    hist
}

/// Frame-averaged band histogram of one modality's region along a track.
pub fn sequence_histogram(frames: &[ImageFrame], track: &[BBox], modality: Modality) -> Result<Vec<f64>> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("frames"));
    }
    if frames.len() != track.len() {
        return Err(Error::ConfigInvalid(format!(
            "{} frames but {} track boxes",
            frames.len(),
            track.len()
        )));
    }
    let mut acc = vec![0.0; HIST_LEN];
    for (f, b) in frames.iter().zip(track) {
        let h = band_histogram(&thumbnail(f, modality_region(b, modality)));
        acc.iter_mut().zip(h).for_each(|(a, v)| *a += v);
    }
    let n = frames.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}
