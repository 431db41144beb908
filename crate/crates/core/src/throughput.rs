//! Serialized per-module throughput measurement.
//!
//! Every module runs one after another on each frame, and each module's
//! wall time is accumulated separately. Frames per second is total frames
//! over the summed module seconds, so it describes a single serialized
//! worker rather than a pipelined deployment.
//!
//! Modules: detection and tracking (association plus IoU tracking over the
//! detection records), restoration (turbulence degradation of each face
//! crop, standing in for a restoration network), then the face, gait and
//! body encoders.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assoc::{associate_frame, AssocConfig, IouTracker, DEFAULT_MAX_AGE};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::model::{BBox, BoxKind, ImageFrame, Modality, ModalityDims};
use crate::pipeline::{load_video, Encoders, Video};
use crate::synth::{generate, SynthConfig};
use crate::turbsim::{degrade, frame_seed, sample_field, TurbulenceConfig};

pub const SCHEMA_ID: &str = "farsight-bench/1";

/// JSON Schema of [`BenchReport`].
pub const BENCH_SCHEMA: &str = r##"{
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "farsight-bench/1",
  "type": "object",
  "additionalProperties": false,
  "required": ["schema", "resolutions", "module_seconds", "combined"],
  "properties": {
    "schema": { "type": "string" },
    "resolutions": {
      "type": "array",
      "items": {
        "type": "object",
        "additionalProperties": false,
        "required": ["name", "width", "height", "frames", "module_seconds", "total_seconds", "fps"],
        "properties": {
          "name": { "type": "string" },
          "width": { "type": "integer" },
          "height": { "type": "integer" },
          "frames": { "type": "integer" },
          "module_seconds": { "$ref": "#/$defs/modules" },
          "total_seconds": { "type": "number" },
          "fps": { "type": "number" }
        }
      }
    },
    "module_seconds": { "$ref": "#/$defs/modules" },
    "combined": {
      "type": "object",
      "additionalProperties": false,
      "required": ["frames", "total_seconds", "fps"],
      "properties": {
        "frames": { "type": "integer" },
        "total_seconds": { "type": "number" },
        "fps": { "type": "number" }
      }
    }
  },
  "$defs": {
    "modules": {
      "type": "object",
      "additionalProperties": false,
      "required": ["detection_tracking", "restoration", "face", "gait", "body"],
      "properties": {
        "detection_tracking": { "type": "number" },
        "restoration": { "type": "number" },
        "face": { "type": "number" },
        "gait": { "type": "number" },
        "body": { "type": "number" }
      }
    }
  }
}"##;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModuleSeconds {
    pub detection_tracking: f64,
    pub restoration: f64,
    pub face: f64,
    pub gait: f64,
    pub body: f64,
}

impl ModuleSeconds {
    pub fn total(&self) -> f64 {
        self.detection_tracking + self.restoration + self.face + self.gait + self.body
    }

    fn add(&mut self, o: &ModuleSeconds) {
        self.detection_tracking += o.detection_tracking;
        self.restoration += o.restoration;
        self.face += o.face;
        self.gait += o.gait;
        self.body += o.body;
    }

    fn encoder_mut(&mut self, m: Modality) -> &mut f64 {
        match m {
            Modality::Face => &mut self.face,
            Modality::Gait => &mut self.gait,
            Modality::Body => &mut self.body,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub frames: usize,
    pub module_seconds: ModuleSeconds,
    pub total_seconds: f64,
    pub fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedReport {
    pub frames: usize,
    pub total_seconds: f64,
    pub fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: String,
    pub resolutions: Vec<ResolutionReport>,
    pub module_seconds: ModuleSeconds,
    pub combined: CombinedReport,
}

impl BenchReport {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<10}{:>8}{:>12}{:>12}{:>10}{:>10}{:>10}{:>10}\n",
            "input", "frames", "det+track", "restore", "face", "gait", "body", "fps"
        );
        let line = |name: &str, frames: usize, m: &ModuleSeconds, fps: f64| {
            format!(
                "{:<10}{:>8}{:>12.3}{:>12.3}{:>10.3}{:>10.3}{:>10.3}{:>10.2}\n",
                name, frames, m.detection_tracking, m.restoration, m.face, m.gait, m.body, fps
            )
        };
        for r in &self.resolutions {
            out += &line(&r.name, r.frames, &r.module_seconds, r.fps);
        }
        out += &line("combined", self.combined.frames, &self.module_seconds, self.combined.fps);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionSpec {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Synthesized when `corpus_dir` is unset. Frame counts keep the 2:1
    /// ratio of 1080p to 4K footage.
    pub resolutions: Vec<ResolutionSpec>,
    /// Directory with one video subdirectory per resolution name.
    pub corpus_dir: Option<PathBuf>,
    pub seed: u64,
    pub psf_size: usize,
    pub dims: ModalityDims,
    pub turbulence: TurbulenceConfig,
    pub assoc: AssocConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            resolutions: vec![
                ResolutionSpec {
                    name: "1080p".into(),
                    width: 1920,
                    height: 1080,
                    frames: 8,
                },
                ResolutionSpec {
                    name: "4k".into(),
                    width: 3840,
                    height: 2160,
                    frames: 4,
                },
            ],
            corpus_dir: None,
            seed: 0,
            psf_size: 9,
            dims: ModalityDims::default(),
            turbulence: TurbulenceConfig::with_strength(2.0, 0),
            assoc: AssocConfig::default(),
        }
    }
}

fn synth_video(spec: &ResolutionSpec, seed: u64) -> Result<Video> {
    let cfg = SynthConfig {
        subjects: 1,
        gallery_videos_per_subject: 0,
        probe_videos_per_subject: 1,
        frames_per_video: spec.frames,
        width: spec.width,
        height: spec.height,
        seed,
    };
    let v = generate(&cfg)?.pop().expect("one probe video");
    Ok(Video {
        id: spec.name.clone(),
        subject_id: Some(v.subject_id),
        frames: v.frames,
        detections: v.detections,
    })
}

fn load_corpus(dir: &Path, spec: &ResolutionSpec) -> Result<Video> {
    let sub = dir.join(&spec.name);
    if !sub.is_dir() {
        return Err(Error::CorpusMissing(sub.display().to_string()));
    }
    load_video(&sub)
}

/// Grayscale pixel-aligned crop of `b`, clamped to the frame.
fn crop(frame: &ImageFrame, b: &BBox) -> Result<ImageFrame> {
    let gray = frame.to_gray();
    let (w, h) = (gray.width() as i64, gray.height() as i64);
    let x0 = (b.x_min.floor() as i64).clamp(0, w - 1);
    let y0 = (b.y_min.floor() as i64).clamp(0, h - 1);
    let x1 = (b.x_max.ceil() as i64).clamp(x0 + 1, w);
    let y1 = (b.y_max.ceil() as i64).clamp(y0 + 1, h);
    let mut data = Vec::with_capacity(((x1 - x0) * (y1 - y0)) as usize);
    for y in y0..y1 {
        let row = (y * w) as usize;
        data.extend_from_slice(&gray.data()[row + x0 as usize..row + x1 as usize]);
    }
    Ok(ImageFrame::new((x1 - x0) as u32, (y1 - y0) as u32, 1, data, frame.frame_index())?)
}

fn time_video(video: &Video, cfg: &BenchConfig, encoders: &Encoders) -> Result<ModuleSeconds> {
    let mut secs = ModuleSeconds::default();
    let mut tracker = IouTracker::new(0.3, DEFAULT_MAX_AGE);
    for (i, frame) in video.frames.iter().enumerate() {
        let Some(fd) = video.detections.frames.iter().find(|f| f.frame_index == i as u64) else {
            continue;
        };

        let t = Instant::now();
        let assoc = associate_frame(fd, &cfg.assoc)?;
        let bodies = fd
            .detections
            .iter()
            .filter(|d| d.kind == BoxKind::Body)
            .map(|d| d.to_bbox())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        tracker.update(&bodies);
        secs.detection_tracking += t.elapsed().as_secs_f64();

        let faces: Vec<BBox> = assoc
            .links
            .iter()
            .map(|l| fd.detections[l.face].to_bbox())
            .collect::<std::result::Result<_, _>>()?;

        let t = Instant::now();
        for (k, f) in faces.iter().enumerate() {
            let c = crop(frame, f)?;
            let turb = TurbulenceConfig {
                rng_seed: frame_seed(cfg.seed, (i * 64 + k) as u64),
                ..cfg.turbulence.clone()
            };
            let field = sample_field(&turb, c.width(), c.height())?;
            std::hint::black_box(degrade(&c, &field, cfg.psf_size)?);
        }
        secs.restoration += t.elapsed().as_secs_f64();

        for m in Modality::ALL {
            let t = Instant::now();
            let boxes: &[BBox] = if m == Modality::Face { &faces } else { &bodies };
            for b in boxes {
                std::hint::black_box(encoders.get(m).encode(std::slice::from_ref(frame), std::slice::from_ref(b))?);
            }
            *secs.encoder_mut(m) += t.elapsed().as_secs_f64();
        }
    }
    Ok(secs)
}

fn fps(frames: usize, seconds: f64) -> f64 {
    if seconds > 0.0 {
        frames as f64 / seconds
    } else {
        0.0
    }
}

/// Times every module serially over the corpus.
pub fn bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.psf_size % 2 == 0 {
        return Err(Error::ConfigInvalid("psf_size must be odd".into()));
    }
    cfg.turbulence.validate()?;
    if let Some(dir) = &cfg.corpus_dir {
        if !dir.is_dir() {
            return Err(Error::CorpusMissing(dir.display().to_string()));
        }
    }
    if cfg.resolutions.is_empty() {
        return Err(Error::CorpusMissing("no resolutions configured".into()));
    }
    let encoders = Encoders::new(&cfg.dims, cfg.seed);
    let mut resolutions = Vec::new();
    let mut all = ModuleSeconds::default();
    let mut frames = 0;
    for spec in &cfg.resolutions {
        let video = match &cfg.corpus_dir {
            Some(dir) => load_corpus(dir, spec)?,
            None => synth_video(spec, cfg.seed)?,
        };
        if video.frames.is_empty() {
            return Err(Error::CorpusMissing(format!("{}: no frames", spec.name)));
        }
        let secs = time_video(&video, cfg, &encoders)?;
        let n = video.frames.len();
        let total = secs.total();
        all.add(&secs);
        frames += n;
        resolutions.push(ResolutionReport {
            name: spec.name.clone(),
            width: video.frames[0].width(),
            height: video.frames[0].height(),
            frames: n,
            module_seconds: secs,
            total_seconds: total,
            fps: fps(n, total),
        });
    }
    let total = all.total();
    Ok(BenchReport {
        schema: SCHEMA_ID.into(),
        resolutions,
        module_seconds: all,
        combined: CombinedReport {
            frames,
            total_seconds: total,
            fps: fps(frames, total),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn small(frames: usize) -> BenchConfig {
        BenchConfig {
            resolutions: vec![
                ResolutionSpec { name: "a".into(), width: 160, height: 96, frames },
                ResolutionSpec { name: "b".into(), width: 320, height: 192, frames: frames / 2 },
            ],
            dims: ModalityDims { face: 32, gait: 32, body: 32 },
            ..Default::default()
        }
    }

    /// Checks `v` against the subset of JSON Schema used by [`BENCH_SCHEMA`].
    fn conforms(v: &Value, schema: &Value, root: &Value) -> bool {
        if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
            let name = r.trim_start_matches("#/$defs/");
            return conforms(v, &root["$defs"][name], root);
        }
        match schema["type"].as_str() {
            Some("object") => {
                let Some(obj) = v.as_object() else { return false };
                let props = schema["properties"].as_object().unwrap();
                let required: Vec<&str> = schema["required"].as_array().unwrap().iter().map(|s| s.as_str().unwrap()).collect();
                required.iter().all(|k| obj.contains_key(*k))
                    && obj.iter().all(|(k, x)| props.get(k).is_some_and(|s| conforms(x, s, root)))
            }
            Some("array") => v.as_array().is_some_and(|a| a.iter().all(|x| conforms(x, &schema["items"], root))),
            Some("string") => v.is_string(),
            Some("integer") => v.is_u64() || v.is_i64(),
            Some("number") => v.is_number(),
            _ => false,
        }
    }

    #[test]
    fn fps_is_frames_over_summed_module_time() {
        let r = bench(&small(4)).unwrap();
        let mut total = 0.0;
        for res in &r.resolutions {
            let m = &res.module_seconds;
            let s = m.detection_tracking + m.restoration + m.face + m.gait + m.body;
            assert!((res.total_seconds - s).abs() < 1e-12);
            assert!((res.fps - res.frames as f64 / s).abs() < 1e-9 * res.fps);
            total += s;
        }
        assert_eq!(r.combined.frames, 6);
        assert!((r.combined.total_seconds - total).abs() < 1e-12);
        assert!((r.combined.fps - 6.0 / total).abs() < 1e-9 * r.combined.fps);
        assert!(r.to_table().lines().count() == 4);
    }

    #[test]
    fn report_matches_documented_schema() {
        let schema: Value = serde_json::from_str(BENCH_SCHEMA).unwrap();
        let v = serde_json::to_value(bench(&small(2)).unwrap()).unwrap();
        assert!(conforms(&v, &schema, &schema));
        let mut extra = v.clone();
        extra["unexpected"] = Value::Bool(true);
        assert!(!conforms(&extra, &schema, &schema));
        let mut missing = v;
        missing["module_seconds"].as_object_mut().unwrap().remove("gait");
        assert!(!conforms(&missing, &schema, &schema));
    }

    #[test]
    fn missing_corpus_is_reported() {
        let cfg = BenchConfig {
            corpus_dir: Some("/nonexistent/bench".into()),
            ..small(2)
        };
        assert!(matches!(bench(&cfg), Err(Error::CorpusMissing(_))));
        let dir = tempfile::tempdir().unwrap();
        let cfg = BenchConfig {
            corpus_dir: Some(dir.path().to_path_buf()),
            ..small(2)
        };
        assert!(matches!(bench(&cfg), Err(Error::CorpusMissing(_))));
    }
}
