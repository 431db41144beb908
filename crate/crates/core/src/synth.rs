//! Synthetic walking-subject corpus for end-to-end runs.
//!
//! Each subject is a flat-shaded figure (hair, face with eyes, striped
//! torso, two swinging legs) with its own intensities and stripe pattern.
//! Videos show one subject walking across a textured background; every
//! frame comes with body and face detections in the exchange format.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::assoc::{DetectionFile, DetectionRecord, FrameDetections, GroundTruthRecord};
use crate::error::{Error, Result};
use crate::image_io::{write_frame, BitDepth};
use crate::model::{BoxKind, ImageFrame};

pub const EMBEDDING_DIM: usize = 16;
pub const DETECTIONS_FILE: &str = "detections.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub subjects: usize,
    pub gallery_videos_per_subject: usize,
    pub probe_videos_per_subject: usize,
    pub frames_per_video: usize,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            subjects: 8,
            gallery_videos_per_subject: 2,
            probe_videos_per_subject: 1,
            frames_per_video: 8,
            width: 128,
            height: 96,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Gallery,
    Probe,
}

/// Appearance parameters of one synthetic subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectLook {
    pub id: String,
    pub hair: f64,
    pub skin: f64,
    pub torso: f64,
    pub stripe_amp: f64,
    pub stripe_period: f64,
    pub legs: f64,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthVideo {
    pub video_id: String,
    pub subject_id: String,
    pub role: Role,
    pub frames: Vec<ImageFrame>,
    pub detections: DetectionFile,
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

/// Subjects spread over the intensity range by low-discrepancy sequences, so
/// any two differ in at least one body part.
pub fn subject_looks(n: usize, seed: u64) -> Vec<SubjectLook> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0F5B);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..n)
        .map(|i| {
            let t = i as f64;
            let j: [f64; 4] = std::array::from_fn(|_| rng.random_range(-0.02..0.02));
            let mut emb: Vec<f64> = (0..EMBEDDING_DIM).map(|_| normal.sample(&mut rng)).collect();
            let norm = emb.iter().map(|v| v * v).sum::<f64>().sqrt();
            emb.iter_mut().for_each(|v| *v /= norm);
            SubjectLook {
                id: format!("subject{i:02}"),
                hair: 0.05 + 0.85 * frac(0.1 + t * 0.618_034) + j[0],
                skin: 0.35 + 0.45 * frac(0.3 + t * 0.381_966) + j[1],
                torso: 0.08 + 0.84 * frac(0.5 + t * 0.754_878) + j[2],
                stripe_amp: 0.04 + 0.2 * frac(t * 0.569_840),
                stripe_period: 3.0 + (i % 4) as f64,
                legs: 0.08 + 0.84 * frac(0.7 + t * 0.245_122) + j[3],
                embedding: emb,
            }
        })
        .collect()
}

struct Pose {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    phase: f64,
}

impl Pose {
    fn body(&self) -> [f64; 4] {
        [self.x, self.y, self.x + self.w, self.y + self.h]
    }

    fn face(&self) -> [f64; 4] {
        [
            self.x + 0.2 * self.w,
            self.y,
            self.x + 0.8 * self.w,
            self.y + 0.22 * self.h,
        ]
    }
}

fn figure_value(look: &SubjectLook, pose: &Pose, px: f64, py: f64) -> Option<f64> {
    let u = (px - pose.x) / pose.w;
    let v = (py - pose.y) / pose.h;
    if !(0.0..1.0).contains(&u) || !(0.0..1.0).contains(&v) {
        return None;
    }
    let du = (u - 0.5).abs();
    if v < 0.22 {
        if du >= 0.3 {
            return None;
        }
        if v < 0.07 {
            return Some(look.hair);
        }
        if (0.11..0.15).contains(&v) && (0.08..0.17).contains(&du) {
            return Some(0.03);
        }
        return Some(look.skin);
    }
    if v < 0.6 {
        let local = py - pose.y - 0.22 * pose.h;
        let s = (2.0 * std::f64::consts::PI * local / look.stripe_period).sin();
        return Some(look.torso + look.stripe_amp * s.signum());
    }
    let spread = 0.2 + 0.1 * pose.phase.sin();
    for c in [0.5 - spread, 0.5 + spread] {
        if (u - c).abs() < 0.12 {
            return Some(look.legs * (1.0 - 0.15 * (v - 0.6)));
        }
    }
    None
}

fn render(look: &SubjectLook, pose: &Pose, cfg: &SynthConfig, bg_phase: f64, rng: &mut ChaCha8Rng, index: u64) -> ImageFrame {
    let noise = Normal::new(0.0, 0.01).expect("noise sigma");
    let mut data = Vec::with_capacity((cfg.width * cfg.height) as usize);
    for y in 0..cfg.height {
        for x in 0..cfg.width {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let bg = 0.5
                + 0.08 * (px * 0.11 + bg_phase).sin() * (py * 0.07 - bg_phase).cos()
                + 0.04 * (py * 0.23).sin();
            let v = figure_value(look, pose, px, py).unwrap_or(bg) + noise.sample(rng);
            data.push(v.clamp(0.0, 1.0));
        }
    }
    ImageFrame::new(cfg.width, cfg.height, 1, data, index).expect("synthetic frame is valid")
}

fn jittered(b: [f64; 4], rng: &mut ChaCha8Rng) -> [f64; 4] {
    b.map(|c| c + rng.random_range(-0.75..0.75))
}

fn noisy_embedding(e: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = Normal::new(0.0, 0.03).expect("embedding noise");
    e.iter().map(|v| v + n.sample(rng)).collect()
}

fn make_video(look: &SubjectLook, role: Role, k: usize, cfg: &SynthConfig) -> SynthVideo {
    let tag = match role {
        Role::Gallery => 0u64,
        Role::Probe => 1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(
        cfg.seed ^ (look.id.bytes().fold(0u64, |a, b| a.wrapping_mul(131).wrapping_add(b as u64)) << 8)
            ^ (tag << 4)
            ^ k as u64,
    );
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let fig_h = h * rng.random_range(0.6..0.72);
    let fig_w = fig_h * 0.32;
    let y = rng.random_range(2.0..(h - fig_h - 2.0).max(2.5));
    let leftward = rng.random_bool(0.5);
    let travel = (w - fig_w - 4.0).max(1.0);
    // slow enough that consecutive body boxes overlap well
    let speed = (travel / cfg.frames_per_video as f64).min(0.2 * fig_w);
    let span = speed * (cfg.frames_per_video - 1) as f64;
    let start = 2.0 + rng.random_range(0.0..=(travel - span).max(0.0));
    let bg_phase = rng.random_range(0.0..6.0);
    let phase0 = rng.random_range(0.0..6.0);

    let video_id = match role {
        Role::Gallery => format!("{}_g{k}", look.id),
        Role::Probe => format!("{}_p{k}", look.id),
    };
    let mut frames = Vec::new();
    let mut records = Vec::new();
    for f in 0..cfg.frames_per_video {
        let step = speed * f as f64;
        let x = if leftward { start + span - step } else { start + step };
        let pose = Pose {
            x,
            y: y + 0.8 * (f as f64 * 1.3).sin(),
            w: fig_w,
            h: fig_h,
            phase: phase0 + 0.9 * f as f64,
        };
        frames.push(render(look, &pose, cfg, bg_phase, &mut rng, f as u64));
        let face = pose.face();
        let face_center = [(face[0] + face[2]) / 2.0, (face[1] + face[3]) / 2.0];
        records.push(FrameDetections {
            frame_index: f as u64,
            detections: vec![
                DetectionRecord {
                    kind: BoxKind::Body,
                    bbox: jittered(pose.body(), &mut rng),
                    confidence: rng.random_range(0.85..0.99),
                    embedding: noisy_embedding(&look.embedding, &mut rng),
                    head_hook: Some([
                        face_center[0] + rng.random_range(-0.5..0.5),
                        face_center[1] + rng.random_range(-0.5..0.5),
                    ]),
                },
                DetectionRecord {
                    kind: BoxKind::Face,
                    bbox: jittered(face, &mut rng),
                    confidence: rng.random_range(0.6..0.95),
                    embedding: noisy_embedding(&look.embedding, &mut rng),
                    head_hook: None,
                },
            ],
            ground_truth: Some(vec![GroundTruthRecord {
                body: pose.body(),
                face: Some(face),
                head_center: face_center,
            }]),
        });
    }
    SynthVideo {
        video_id,
        subject_id: look.id.clone(),
        role,
        frames,
        detections: DetectionFile {
            subject_id: Some(look.id.clone()),
            image_width: Some(cfg.width),
            image_height: Some(cfg.height),
            frames: records,
        },
    }
}

/// Gallery and probe videos for every subject, in subject order.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<SynthVideo>> {
    if cfg.subjects == 0 || cfg.frames_per_video == 0 {
        return Err(Error::ConfigInvalid("synthetic corpus needs subjects and frames".into()));
    }
    if cfg.width < 32 || cfg.height < 32 {
        return Err(Error::ConfigInvalid("synthetic frames must be at least 32x32".into()));
    }
    let mut out = Vec::new();
    for look in subject_looks(cfg.subjects, cfg.seed) {
        for k in 0..cfg.gallery_videos_per_subject {
            out.push(make_video(&look, Role::Gallery, k, cfg));
        }
        for k in 0..cfg.probe_videos_per_subject {
            out.push(make_video(&look, Role::Probe, k, cfg));
        }
    }
    Ok(out)
}

/// Writes one video as `frame_NNNN.png` files plus `detections.json`.
pub fn write_video(dir: &Path, video: &SynthVideo) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in video.frames.iter().enumerate() {
        write_frame(&dir.join(format!("frame_{i:04}.png")), f, BitDepth::Sixteen)?;
    }
    let path = dir.join(DETECTIONS_FILE);
    let text = serde_json::to_string_pretty(&video.detections)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Writes `root/gallery/<video>/`, `root/probe/<video>/` and `root/mates.json`
/// (probe video id to subject id).
pub fn write_corpus(root: &Path, videos: &[SynthVideo]) -> Result<()> {
    let mut mates = std::collections::BTreeMap::new();
    for v in videos {
        let sub = match v.role {
            Role::Gallery => "gallery",
            Role::Probe => {
                mates.insert(v.video_id.clone(), Some(v.subject_id.clone()));
                "probe"
            }
        };
        write_video(&root.join(sub).join(&v.video_id), v)?;
    }
    let path = root.join("mates.json");
    std::fs::write(&path, serde_json::to_string_pretty(&mates)?).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_shape_and_determinism() {
        let cfg = SynthConfig {
            subjects: 3,
            frames_per_video: 4,
            ..Default::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.len(), 3 * 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.frames, y.frames);
            assert_eq!(x.detections, y.detections);
        }
        let v = &a[0];
        assert_eq!(v.frames.len(), 4);
        assert_eq!(v.detections.frames.len(), 4);
        assert!(v.frames.iter().all(|f| f.data().iter().all(|p| (0.0..=1.0).contains(p))));
    }

    #[test]
    fn subjects_are_distinct() {
        let looks = subject_looks(8, 0);
        for i in 0..8 {
            for j in 0..i {
                let (a, b) = (&looks[i], &looks[j]);
                let d = [a.hair - b.hair, a.skin - b.skin, a.torso - b.torso, a.legs - b.legs]
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(d > 0.08, "subjects {i} and {j} too similar");
            }
        }
    }

    #[test]
    fn detections_cover_the_figure() {
        let cfg = SynthConfig {
            subjects: 1,
            frames_per_video: 2,
            ..Default::default()
        };
        let v = &generate(&cfg).unwrap()[0];
        let det = &v.detections.frames[0].detections;
        assert_eq!(det[0].kind, BoxKind::Body);
        assert_eq!(det[1].kind, BoxKind::Face);
        let [x0, y0, x1, y1] = det[1].bbox;
        let [bx0, by0, bx1, _] = det[0].bbox;
        assert!(x0 > bx0 - 1.0 && x1 < bx1 + 1.0 && y0 > by0 - 1.0 && y1 > y0);
    }

    #[test]
    fn written_corpus_has_layout() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            subjects: 2,
            frames_per_video: 2,
            ..Default::default()
        };
        write_corpus(dir.path(), &generate(&cfg).unwrap()).unwrap();
        assert!(dir.path().join("gallery/subject00_g1/frame_0001.png").exists());
        assert!(dir.path().join("probe/subject01_p0").join(DETECTIONS_FILE).exists());
        let mates: std::collections::BTreeMap<String, Option<String>> =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("mates.json")).unwrap()).unwrap();
        assert_eq!(mates["subject01_p0"].as_deref(), Some("subject01"));
    }
}
