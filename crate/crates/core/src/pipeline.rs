//! Video-to-template orchestration.
//!
//! Per video: ingest frames and detections, associate faces to bodies,
//! track bodies, keep the longest track, optionally degrade the frames with
//! simulated turbulence, encode each modality and mean-pool over the
//! sequence. Gallery mode then merges every sequence of a subject into one
//! template per modality.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::mpsc::sync_channel;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assoc::{associate_frame, track_iou, AssocConfig, DetectionFile, FrameAssociation, DEFAULT_MAX_AGE};
use crate::encoder::{band_histogram, modality_region, thumbnail, ToyEncoder, HIST_LEN};
use crate::error::{Error, Result};
use crate::fusion::{aggregate_gallery, is_face_only, FusionConfig, GalleryEntry};
use crate::image_io::{list_frames, read_frame};
use crate::model::{BBox, BoxKind, ImageFrame, Modality, ModalityDims, Template};
use crate::synth::DETECTIONS_FILE;
use crate::turbsim::{degrade, frame_seed, sample_field, TurbulenceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Probe,
    Gallery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub mode: Mode,
    /// Degrade frames with simulated turbulence before encoding.
    pub simulate: bool,
    pub seed: u64,
    pub psf_size: usize,
    pub track_iou_gate: f64,
    pub track_max_age: usize,
    pub dims: ModalityDims,
    pub turbulence: TurbulenceConfig,
    pub assoc: AssocConfig,
    pub fusion: FusionConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Probe,
            simulate: false,
            seed: 0,
            psf_size: 9,
            track_iou_gate: 0.3,
            track_max_age: DEFAULT_MAX_AGE,
            dims: ModalityDims::default(),
            turbulence: TurbulenceConfig::default(),
            assoc: AssocConfig::default(),
            fusion: FusionConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.psf_size == 0 || self.psf_size % 2 == 0 {
            return bad(format!("psf_size must be odd and positive, got {}", self.psf_size));
        }
        if !(0.0..1.0).contains(&self.track_iou_gate) {
            return bad(format!("track_iou_gate {} outside [0, 1)", self.track_iou_gate));
        }
        if Modality::ALL.iter().any(|&m| self.dims.get(m) == 0) {
            return bad("template dims must be positive".into());
        }
        self.assoc.validate()?;
        self.fusion.validate()?;
        if self.simulate {
            self.turbulence.validate()?;
        }
        Ok(())
    }
}

/// One ingested video.
#[derive(Debug, Clone)]
pub struct Video {
    pub id: String,
    pub subject_id: Option<String>,
    pub frames: Vec<ImageFrame>,
    pub detections: DetectionFile,
}

/// Reads a video directory: image files in name order plus `detections.json`.
pub fn load_video(dir: &Path) -> Result<Video> {
    let det_path = dir.join(DETECTIONS_FILE);
    if !det_path.is_file() {
        return Err(Error::MissingDetections(det_path.display().to_string()));
    }
    let text = std::fs::read_to_string(&det_path).map_err(|e| Error::io(&det_path, e))?;
    let detections: DetectionFile = serde_json::from_str(&text)?;
    let frames = list_frames(dir)?
        .iter()
        .enumerate()
        .map(|(i, p)| read_frame(p, i as u64))
        .collect::<Result<Vec<_>>>()?;
    let id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "video".into());
    Ok(Video {
        id,
        subject_id: detections.subject_id.clone(),
        frames,
        detections,
    })
}

/// A single video directory, or every subdirectory of `dir` in name order.
pub fn load_videos(dir: &Path) -> Result<Vec<Video>> {
    if dir.join(DETECTIONS_FILE).is_file() {
        return Ok(vec![load_video(dir)?]);
    }
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(Error::MissingDetections(format!(
            "{} has neither {DETECTIONS_FILE} nor video subdirectories",
            dir.display()
        )));
    }
    subdirs.iter().map(|d| load_video(d)).collect()
}

/// Face/gait/body toy encoders sharing one seed.
pub struct Encoders {
    encoders: Vec<ToyEncoder>,
}

impl Encoders {
    pub fn new(dims: &ModalityDims, seed: u64) -> Self {
        Self {
            encoders: Modality::ALL
                .iter()
                .map(|&m| ToyEncoder::new(m, dims.get(m), seed))
                .collect(),
        }
    }

    pub fn get(&self, m: Modality) -> &ToyEncoder {
        &self.encoders[m.index()]
    }
}

/// The selected track of one video and what was produced from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub video_id: String,
    pub subject_id: Option<String>,
    pub track_id: Option<u64>,
    /// Frame indices covered by the selected track.
    pub track_frames: Vec<u64>,
    pub associations: Vec<FrameAssociation>,
    /// Modalities with a template; gait and body drop out when every track
    /// frame looks face-only.
    pub modalities: Vec<Modality>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub templates: Vec<Template>,
    pub sequences: Vec<SequenceRecord>,
}

/// Work item for one frame of the selected track.
#[derive(Debug, Clone)]
struct TrackFrame {
    frame: usize,
    body: BBox,
    face: Option<BBox>,
    face_only: bool,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn plan_track(video: &Video, cfg: &PipelineConfig) -> Result<(Vec<FrameAssociation>, Option<u64>, Vec<TrackFrame>)> {
    let n = video.frames.len();
    if n == 0 {
        return Err(Error::MissingDetections(format!("video {} has no frames", video.id)));
    }
    let mut by_frame: Vec<Option<&crate::assoc::FrameDetections>> = vec![None; n];
    for fd in &video.detections.frames {
        let i = fd.frame_index as usize;
        if i >= n {
            return Err(Error::ConfigInvalid(format!(
                "video {}: detections for frame {} but only {} frames",
                video.id, fd.frame_index, n
            )));
        }
        by_frame[i] = Some(fd);
    }

    let mut associations = Vec::new();
    let mut bodies: Vec<Vec<BBox>> = Vec::with_capacity(n);
    let mut body_det: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut face_of_body: Vec<BTreeMap<usize, BBox>> = Vec::with_capacity(n);
    for fd in &by_frame {
        let (mut b, mut bi, mut fm) = (Vec::new(), Vec::new(), BTreeMap::new());
        if let Some(fd) = fd {
            let a = associate_frame(fd, &cfg.assoc)?;
            for link in &a.links {
                if let Some(body) = link.body {
                    fm.insert(body, fd.detections[link.face].to_bbox()?);
                }
            }
            for (i, d) in fd.detections.iter().enumerate() {
                if d.kind == BoxKind::Body {
                    b.push(d.to_bbox()?);
                    bi.push(i);
                }
            }
            associations.push(a);
        }
        bodies.push(b);
        body_det.push(bi);
        face_of_body.push(fm);
    }

    let ids = track_iou(&bodies, cfg.track_iou_gate, cfg.track_max_age);
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for f in &ids {
        for &id in f {
            *counts.entry(id).or_default() += 1;
        }
    }
    // longest track; ties go to the earliest id
    let Some((&best, _)) = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) else {
        return Err(Error::MissingDetections(format!("video {} has no body detections", video.id)));
    };
    let image_h = video.frames[0].height() as f64;
    let mut plan = Vec::new();
    for (f, frame_ids) in ids.iter().enumerate() {
        if let Some(k) = frame_ids.iter().position(|&id| id == best) {
            let body = bodies[f][k];
            plan.push(TrackFrame {
                frame: f,
                body,
                face: face_of_body[f].get(&body_det[f][k]).copied(),
                face_only: is_face_only(&body, image_h, cfg.fusion.padding_threshold),
            });
        }
    }
    Ok((associations, Some(best), plan))
}

fn prepare_frame(video: &Video, tf: &TrackFrame, cfg: &PipelineConfig) -> Result<ImageFrame> {
    let frame = &video.frames[tf.frame];
    if !cfg.simulate {
        return Ok(frame.clone());
    }
    let turbulence = TurbulenceConfig {
        rng_seed: frame_seed(
            cfg.turbulence.rng_seed ^ cfg.seed.rotate_left(17) ^ fnv1a(&video.id),
            tf.frame as u64,
        ),
        ..cfg.turbulence.clone()
    };
    let gray = frame.to_gray();
    let field = sample_field(&turbulence, gray.width(), gray.height())?;
    Ok(degrade(&gray, &field, cfg.psf_size)?)
}

/// Running per-modality histogram sums for one sequence.
struct Pool {
    sums: [Vec<f64>; 3],
    counts: [usize; 3],
}

impl Pool {
    fn new() -> Self {
        Self {
            sums: std::array::from_fn(|_| vec![0.0; HIST_LEN]),
            counts: [0; 3],
        }
    }

    fn add(&mut self, frame: &ImageFrame, tf: &TrackFrame) {
        for m in Modality::ALL {
            if m != Modality::Face && tf.face_only {
                continue;
            }
            let b = match m {
                Modality::Face => tf.face.unwrap_or(tf.body),
                _ => tf.body,
            };
            let h = band_histogram(&thumbnail(frame, modality_region(&b, m)));
            let i = m.index();
            self.sums[i].iter_mut().zip(h).for_each(|(a, v)| *a += v);
            self.counts[i] += 1;
        }
    }

    /// Mean-pooled features. The encoder is linear in the histogram, so this
    /// equals the mean of per-frame encodings.
    fn finish(self, encoders: &Encoders) -> Vec<(Modality, Vec<f64>)> {
        Modality::ALL
            .iter()
            .filter(|m| self.counts[m.index()] > 0)
            .map(|&m| {
                let n = self.counts[m.index()] as f64;
                let mean: Vec<f64> = self.sums[m.index()].iter().map(|v| v / n).collect();
                (m, encoders.get(m).project(&mean))
            })
            .collect()
    }
}

struct Sequence {
    record: SequenceRecord,
    features: Vec<(Modality, Vec<f64>)>,
}

fn run_video(video: &Video, cfg: &PipelineConfig, encoders: &Encoders) -> Result<Sequence> {
    let (associations, track_id, plan) = plan_track(video, cfg)?;
    let mut pool = Pool::new();
    for tf in &plan {
        pool.add(&prepare_frame(video, tf, cfg)?, tf);
    }
    Ok(finish_sequence(video, associations, track_id, &plan, pool.finish(encoders)))
}

fn finish_sequence(
    video: &Video,
    associations: Vec<FrameAssociation>,
    track_id: Option<u64>,
    plan: &[TrackFrame],
    features: Vec<(Modality, Vec<f64>)>,
) -> Sequence {
    Sequence {
        record: SequenceRecord {
            video_id: video.id.clone(),
            subject_id: video.subject_id.clone(),
            track_id,
            track_frames: plan.iter().map(|t| t.frame as u64).collect(),
            associations,
            modalities: features.iter().map(|(m, _)| *m).collect(),
        },
        features,
    }
}

/// Same result as the serial path, but ingest, degradation and encoding run
/// as separate threads joined by bounded queues of `capacity` frames.
pub fn run_video_streaming(
    video: &Video,
    cfg: &PipelineConfig,
    encoders: &Encoders,
    capacity: usize,
) -> Result<Vec<(Modality, Vec<f64>)>> {
    cfg.validate()?;
    let (_, _, plan) = plan_track(video, cfg)?;
    let (raw_tx, raw_rx) = sync_channel::<&TrackFrame>(capacity);
    let (ready_tx, ready_rx) = sync_channel::<Result<(ImageFrame, &TrackFrame)>>(capacity);
    let plan = &plan;
    std::thread::scope(|s| {
        s.spawn(move || {
            for tf in plan {
                if raw_tx.send(tf).is_err() {
                    break;
                }
            }
        });
        s.spawn(move || {
            for tf in raw_rx {
                let item = prepare_frame(video, tf, cfg).map(|f| (f, tf));
                let stop = item.is_err();
                if ready_tx.send(item).is_err() || stop {
                    break;
                }
            }
        });
        let mut pool = Pool::new();
        for item in ready_rx {
            let (frame, tf) = item?;
            pool.add(&frame, tf);
        }
        Ok(pool.finish(encoders))
    })
}

/// Runs every video (in parallel) and returns templates in video order.
/// Probe templates are keyed by video id; gallery templates by subject id.
pub fn run_pipeline(videos: &[Video], cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    if videos.is_empty() {
        return Err(Error::MissingDetections("no videos".into()));
    }
    let encoders = Encoders::new(&cfg.dims, cfg.seed);
    let seqs = videos
        .par_iter()
        .map(|v| run_video(v, cfg, &encoders))
        .collect::<Result<Vec<_>>>()?;

    let mut templates = Vec::new();
    match cfg.mode {
        Mode::Probe => {
            for s in &seqs {
                for (m, v) in &s.features {
                    templates.push(Template::with_dim(s.record.video_id.clone(), *m, v.clone(), cfg.dims.get(*m))?);
                }
            }
        }
        Mode::Gallery => {
            let mut order: Vec<String> = Vec::new();
            let mut groups: BTreeMap<String, [Vec<&[f64]>; 3]> = BTreeMap::new();
            for s in &seqs {
                let sid = s.record.subject_id.clone().unwrap_or_else(|| s.record.video_id.clone());
                let g = groups.entry(sid.clone()).or_insert_with(|| {
                    order.push(sid);
                    Default::default()
                });
                for (m, v) in &s.features {
                    g[m.index()].push(v);
                }
            }
            for sid in order {
                for m in Modality::ALL {
                    let vs = &groups[&sid][m.index()];
                    if !vs.is_empty() {
                        templates.push(Template::with_dim(sid.clone(), m, aggregate_gallery(vs)?, cfg.dims.get(m))?);
                    }
                }
            }
        }
    }
    Ok(PipelineOutput {
        templates,
        sequences: seqs.into_iter().map(|s| s.record).collect(),
    })
}

/// Groups templates by subject id (first-seen order) into fusion entries.
pub fn gallery_entries(templates: &[Template]) -> Result<Vec<GalleryEntry>> {
    let mut order: Vec<String> = Vec::new();
    let mut map: BTreeMap<String, GalleryEntry> = BTreeMap::new();
    for t in templates {
        let e = map.entry(t.subject_id().to_string()).or_insert_with(|| {
            order.push(t.subject_id().to_string());
            GalleryEntry {
                subject_id: t.subject_id().to_string(),
                face: None,
                gait: None,
                body: None,
            }
        });
        if e.get(t.modality()).is_some() {
            return Err(Error::ConfigInvalid(format!(
                "duplicate {} template for {}",
                t.modality(),
                t.subject_id()
            )));
        }
        e.set(t.modality(), Some(t.vector().to_vec()));
    }
    Ok(order.into_iter().map(|id| map.remove(&id).expect("grouped")).collect())
}
