//! Shared domain types. Constructors validate; nothing is clamped silently.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected} samples, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("sample {index} out of range: {value}")]
    SampleOutOfRange { index: usize, value: f64 },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    BadChannels(u32),
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),
    #[error("embedding must be a nonzero finite vector")]
    ZeroEmbedding,
    #[error("template for {subject_id} has {len} elements but dim {dim}")]
    TemplateLength {
        subject_id: String,
        len: usize,
        dim: usize,
    },
    #[error("template for {subject_id} contains a non-finite element at {index}")]
    NonFiniteTemplate { subject_id: String, index: usize },
}

/// A single image with linear intensities in `[0, 1]`, stored row-major with
/// interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFrame {
    width: u32,
    height: u32,
    channels: u32,
    data: Vec<f64>,
    frame_index: u64,
}

impl ImageFrame {
    pub fn new(
        width: u32,
        height: u32,
        channels: u32,
        data: Vec<f64>,
        frame_index: u64,
    ) -> Result<Self, ModelError> {
        check_frame(width, height, channels, &data)?;
        Ok(Self {
            width,
            height,
            channels,
            data,
            frame_index,
        })
    }

    /// Uniform image, mostly for tests and synthetic scenes.
    pub fn filled(width: u32, height: u32, channels: u32, value: f64) -> Result<Self, ModelError> {
        let n = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; n], 0)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn with_frame_index(mut self, frame_index: u64) -> Self {
        self.frame_index = frame_index;
        self
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u32) -> f64 {
        self.data[((y as usize * self.width as usize + x as usize) * self.channels as usize)
            + c as usize]
    }

    /// Luma in `[0, 1]`; single-channel frames are returned unchanged.
    pub fn to_gray(&self) -> ImageFrame {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
            .collect();
        ImageFrame {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
            frame_index: self.frame_index,
        }
    }
}

fn check_frame(width: u32, height: u32, channels: u32, data: &[f64]) -> Result<(), ModelError> {
    if channels != 1 && channels != 3 {
        return Err(ModelError::BadChannels(channels));
    }
    let expected = width as usize * height as usize * channels as usize;
    if data.len() != expected {
        return Err(ModelError::DimensionMismatch {
            expected,
            actual: data.len(),
        });
    }
    if let Some((index, &value)) = data
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
    {
        return Err(ModelError::SampleOutOfRange { index, value });
    }
    Ok(())
}

/// Checks every [`ImageFrame`] invariant on raw parts.
pub fn validate_frame(
    width: u32,
    height: u32,
    channels: u32,
    data: &[f64],
) -> Result<(), ModelError> {
    check_frame(width, height, channels, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxKind {
    Body,
    Face,
}

/// Axis-aligned box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub kind: BoxKind,
    pub confidence: f64,
}

impl BBox {
    pub fn new(
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        kind: BoxKind,
        confidence: f64,
    ) -> Result<Self, ModelError> {
        let coords = [x_min, y_min, x_max, y_max];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(ModelError::InvalidBox("non-finite coordinate".into()));
        }
        if !(x_min < x_max && y_min < y_max) {
            return Err(ModelError::InvalidBox(format!(
                "degenerate extent ({x_min}, {y_min}, {x_max}, {y_max})"
            )));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(ModelError::InvalidBox(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
            kind,
            confidence,
        })
    }

    pub fn body(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, ModelError> {
        Self::new(x_min, y_min, x_max, y_max, BoxKind::Body, 1.0)
    }

    pub fn face(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, ModelError> {
        Self::new(x_min, y_min, x_max, y_max, BoxKind::Face, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

/// Unit-norm associative embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub const DEFAULT_DIM: usize = 32;

    /// Normalizes `values` to unit L2 norm. Zero or non-finite input is rejected.
    pub fn new(values: Vec<f64>) -> Result<Self, ModelError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::ZeroEmbedding);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(ModelError::ZeroEmbedding);
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Squared Euclidean distance; embeddings of different length compare over
    /// the shorter prefix.
    pub fn dist_sq(&self, other: &Embedding) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Face,
    Gait,
    Body,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Face, Modality::Gait, Modality::Body];

    pub fn tag(self) -> u8 {
        match self {
            Modality::Face => 0,
            Modality::Gait => 1,
            Modality::Body => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Modality::Face),
            1 => Some(Modality::Gait),
            2 => Some(Modality::Body),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self.tag() as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Face => "face",
            Modality::Gait => "gait",
            Modality::Body => "body",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "face" => Ok(Modality::Face),
            "gait" => Ok(Modality::Gait),
            "body" => Ok(Modality::Body),
            other => Err(format!("unknown modality {other:?}")),
        }
    }
}

/// Template dimension per modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModalityDims {
    pub face: usize,
    pub gait: usize,
    pub body: usize,
}

impl ModalityDims {
    /// Gait dimension reported by the earlier system revision.
    pub const GAIT_DIM_LEGACY: usize = 7936;

    pub fn get(&self, modality: Modality) -> usize {
        match modality {
            Modality::Face => self.face,
            Modality::Gait => self.gait,
            Modality::Body => self.body,
        }
    }
}

impl Default for ModalityDims {
    fn default() -> Self {
        Self {
            face: 512,
            gait: 8704,
            body: 6144,
        }
    }
}

/// One subject's feature vector for one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    subject_id: String,
    modality: Modality,
    vector: Vec<f64>,
}

impl Template {
    pub fn new(
        subject_id: impl Into<String>,
        modality: Modality,
        vector: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let subject_id = subject_id.into();
        if let Some(index) = vector.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteTemplate { subject_id, index });
        }
        Ok(Self {
            subject_id,
            modality,
            vector,
        })
    }

    /// Like [`Template::new`] but also checks the vector against an expected `dim`.
    pub fn with_dim(
        subject_id: impl Into<String>,
        modality: Modality,
        vector: Vec<f64>,
        dim: usize,
    ) -> Result<Self, ModelError> {
        let subject_id = subject_id.into();
        if vector.len() != dim {
            return Err(ModelError::TemplateLength {
                subject_id,
                len: vector.len(),
                dim,
            });
        }
        Self::new(subject_id, modality, vector)
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// Bytes occupied by the vector payload (8 per element).
    pub fn payload_bytes(&self) -> usize {
        self.vector.len() * std::mem::size_of::<f64>()
    }
}
