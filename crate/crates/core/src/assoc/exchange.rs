//! JSON detection-exchange format.
//!
//! ```json
//! {
//!   "subject_id": "s03", "image_width": 1920, "image_height": 1080,
//!   "frames": [
//!     { "frame_index": 0,
//!       "detections": [
//!         { "kind": "body", "bbox": [x0, y0, x1, y1], "confidence": 0.9,
//!           "embedding": [...], "head_hook": [x, y] },
//!         { "kind": "face", "bbox": [x0, y0, x1, y1], "confidence": 0.8,
//!           "embedding": [...] } ],
//!       "ground_truth": [ { "body": [...], "face": [...] | null, "head_center": [x, y] } ] }
//!   ]
//! }
//! ```
//!
//! `subject_id` names the enrolled identity in gallery mode. `ground_truth` is
//! optional and only used for loss diagnostics.

use serde::{Deserialize, Serialize};

use super::{
    assign, associate, association_metric, embedding_loss, hook_loss, hooks_from_sets, pull_loss,
    push_loss, AssocConfig, AssocError, FaceAssignment, GroundTruth, HookLoss, LossParts,
    Proposal, SubjectAnnotation,
};
use crate::model::{BBox, BoxKind, Embedding};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub kind: BoxKind,
    pub bbox: [f64; 4],
    pub confidence: f64,
    pub embedding: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_hook: Option<[f64; 2]>,
}

impl DetectionRecord {
    pub fn to_bbox(&self) -> Result<BBox, AssocError> {
        let [x0, y0, x1, y1] = self.bbox;
        Ok(BBox::new(x0, y0, x1, y1, self.kind, self.confidence)?)
    }

    pub fn to_proposal(&self) -> Result<Proposal, AssocError> {
        Proposal::new(
            self.to_bbox()?,
            Embedding::new(self.embedding.clone())?,
            self.head_hook.map(|[x, y]| (x, y)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub body: [f64; 4],
    #[serde(default)]
    pub face: Option<[f64; 4]>,
    pub head_center: [f64; 2],
}

impl GroundTruthRecord {
    fn to_annotation(&self) -> Result<SubjectAnnotation, AssocError> {
        let [x0, y0, x1, y1] = self.body;
        let face = self
            .face
            .map(|[a, b, c, d]| BBox::face(a, b, c, d))
            .transpose()?;
        Ok(SubjectAnnotation {
            body: BBox::body(x0, y0, x1, y1)?,
            face,
            head_center: (self.head_center[0], self.head_center[1]),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDetections {
    pub frame_index: u64,
    pub detections: Vec<DetectionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<GroundTruthRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_height: Option<u32>,
    pub frames: Vec<FrameDetections>,
}

/// A face detection and the body detection it was linked to (indices into
/// the frame's detection list).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceLink {
    pub face: usize,
    pub body: Option<usize>,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossDiagnostics {
    pub pull: LossParts,
    pub push: LossParts,
    pub embedding: f64,
    pub hook: HookLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAssociation {
    pub frame_index: u64,
    pub links: Vec<FaceLink>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub losses: Option<LossDiagnostics>,
}

/// Links faces to bodies in one frame, plus losses when ground truth is present.
pub fn associate_frame(
    frame: &FrameDetections,
    cfg: &AssocConfig,
) -> Result<FrameAssociation, AssocError> {
    let mut bodies = Vec::new();
    let mut faces = Vec::new();
    let mut body_idx = Vec::new();
    let mut face_idx = Vec::new();
    let mut all = Vec::with_capacity(frame.detections.len());
    for (i, d) in frame.detections.iter().enumerate() {
        let p = d.to_proposal()?;
        match p.kind() {
            BoxKind::Body => {
                bodies.push(p.clone());
                body_idx.push(i);
            }
            BoxKind::Face => {
                faces.push(p.clone());
                face_idx.push(i);
            }
        }
        all.push(p);
    }
    let s = association_metric(&bodies, &faces, cfg)?;
    let links = associate(&s, cfg)
        .into_iter()
        .enumerate()
        .map(|(j, a)| match a {
            FaceAssignment::Body(i) => FaceLink {
                face: face_idx[j],
                body: Some(body_idx[i]),
                score: Some(s.get(i, j)),
            },
            FaceAssignment::NotVisible => FaceLink {
                face: face_idx[j],
                body: None,
                score: None,
            },
        })
        .collect();

    let losses = match &frame.ground_truth {
        Some(records) if !records.is_empty() => {
            let gt = GroundTruth::new(
                records
                    .iter()
                    .map(GroundTruthRecord::to_annotation)
                    .collect::<Result<_, _>>()?,
            )?;
            let sets = assign(&all, &gt, cfg.eta);
            Some(LossDiagnostics {
                pull: pull_loss(&sets, cfg),
                push: push_loss(&sets, cfg),
                embedding: embedding_loss(&sets, cfg),
                hook: hook_loss(&hooks_from_sets(&sets), &gt, cfg)?,
            })
        }
        _ => None,
    };
    Ok(FrameAssociation {
        frame_index: frame.frame_index,
        links,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FrameDetections {
        FrameDetections {
            frame_index: 4,
            detections: vec![
                DetectionRecord {
                    kind: BoxKind::Face,
                    bbox: [3.0, 1.0, 7.0, 5.0],
                    confidence: 0.5,
                    embedding: vec![1.0, 0.0],
                    head_hook: None,
                },
                DetectionRecord {
                    kind: BoxKind::Body,
                    bbox: [0.0, 0.0, 10.0, 30.0],
                    confidence: 0.5,
                    embedding: vec![2.0, 0.0],
                    head_hook: Some([5.0, 3.0]),
                },
            ],
            ground_truth: Some(vec![GroundTruthRecord {
                body: [0.0, 0.0, 10.0, 30.0],
                face: Some([3.0, 1.0, 7.0, 5.0]),
                head_center: [5.0, 3.0],
            }]),
        }
    }

    #[test]
    fn json_round_trip_and_association() {
        let file = DetectionFile {
            subject_id: None,
            image_width: Some(64),
            image_height: None,
            frames: vec![sample()],
        };
        let text = serde_json::to_string(&file).unwrap();
        assert!(!text.contains("image_height"));
        let back: DetectionFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);

        let out = associate_frame(&back.frames[0], &AssocConfig::default()).unwrap();
        assert_eq!(out.frame_index, 4);
        assert_eq!(out.links.len(), 1);
        assert_eq!(out.links[0].face, 0);
        assert_eq!(out.links[0].body, Some(1));
        let losses = out.losses.unwrap();
        assert_eq!(losses.pull.total, 0.0);
        assert_eq!(losses.hook.total, 0.0);
    }

    #[test]
    fn invalid_records_are_rejected() {
        let mut f = sample();
        f.detections[1].head_hook = None;
        assert!(associate_frame(&f, &AssocConfig::default()).is_err());
        let mut f = sample();
        f.detections[0].embedding = vec![0.0, 0.0];
        assert!(associate_frame(&f, &AssocConfig::default()).is_err());
    }
}
