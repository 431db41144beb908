//! Joint body/face association.
//!
//! Training-time losses ([`pull_loss`], [`push_loss`], [`embedding_loss`],
//! [`hook_loss`]) are pure functions of given embeddings and hooks. At
//! inference, [`association_metric`] combines embedding similarity, head-hook
//! distance and detection confidence, and [`associate`] picks a body for each
//! face.

mod exchange;
mod loss;
mod metric;
mod tracker;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BBox, BoxKind, Embedding, ModelError};

pub use exchange::{
    associate_frame, DetectionFile, DetectionRecord, FaceLink, FrameAssociation,
    FrameDetections, GroundTruthRecord, LossDiagnostics,
};
pub use loss::{
    embedding_loss, hook_loss, hooks_from_sets, pull_loss, push_loss, smooth_l1, HookLoss,
    LossParts,
};
pub use metric::{associate, association_metric, association_terms, AssociationTerms, FaceAssignment, Matrix};
pub use tracker::{track_iou, IouTracker, DEFAULT_MAX_AGE};

pub type Point = (f64, f64);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssocError {
    #[error("body proposal {0} has no head hook")]
    MissingHeadHook(usize),
    #[error("degenerate hook vector for subject {0}")]
    DegenerateVector(usize),
    #[error("expected hooks for {expected} subjects, got {actual}")]
    SubjectCountMismatch { expected: usize, actual: usize },
    #[error("invalid association config: {0}")]
    InvalidConfig(String),
    #[error("invalid proposal: {0}")]
    InvalidProposal(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A detected body or face box with its associative embedding. Body
/// proposals carry a predicted head hook; face proposals never do.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    bbox: BBox,
    embedding: Embedding,
    head_hook: Option<Point>,
}

impl Proposal {
    pub fn body(bbox: BBox, embedding: Embedding, head_hook: Point) -> Result<Self, AssocError> {
        Self::new(bbox, embedding, Some(head_hook))
    }

    pub fn face(bbox: BBox, embedding: Embedding) -> Result<Self, AssocError> {
        Self::new(bbox, embedding, None)
    }

    pub fn new(
        bbox: BBox,
        embedding: Embedding,
        head_hook: Option<Point>,
    ) -> Result<Self, AssocError> {
        match (bbox.kind, head_hook) {
            (BoxKind::Body, None) => {
                return Err(AssocError::InvalidProposal("body proposal without head hook".into()))
            }
            (BoxKind::Face, Some(_)) => {
                return Err(AssocError::InvalidProposal("face proposal with head hook".into()))
            }
            _ => {}
        }
        if let Some((x, y)) = head_hook {
            if !(x.is_finite() && y.is_finite()) {
                return Err(AssocError::InvalidProposal("non-finite head hook".into()));
            }
        }
        Ok(Self {
            bbox,
            embedding,
            head_hook,
        })
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    pub fn kind(&self) -> BoxKind {
        self.bbox.kind
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn head_hook(&self) -> Option<Point> {
        self.head_hook
    }

    pub fn center(&self) -> Point {
        self.bbox.center()
    }
}

/// Annotation of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectAnnotation {
    pub body: BBox,
    pub face: Option<BBox>,
    /// Center of the ground-truth head box.
    pub head_center: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    subjects: Vec<SubjectAnnotation>,
}

impl GroundTruth {
    pub fn new(subjects: Vec<SubjectAnnotation>) -> Result<Self, AssocError> {
        if subjects.is_empty() {
            return Err(AssocError::InvalidConfig("ground truth needs at least one subject".into()));
        }
        Ok(Self { subjects })
    }

    pub fn subjects(&self) -> &[SubjectAnnotation] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }
}

/// Loss weights, margins and association thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssocConfig {
    /// IoU threshold for assigning proposals to subjects.
    pub eta: f64,
    /// Pushing margin on squared embedding distance.
    pub delta: f64,
    /// Weight of the body-face term.
    pub mu: f64,
    /// Weight of the body-body plus face-face terms.
    pub beta: f64,
    pub sigma: f64,
    pub tau: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// RBF bandwidth in embedding space.
    pub rbf_bandwidth_embed: f64,
    /// RBF bandwidth for hook distances, as a fraction of the face-box diagonal.
    pub rbf_bandwidth_hook: f64,
    pub visibility_threshold: f64,
    /// Divides center distances in the pulling loss so `exp(dist)` stays in `[1, e]`.
    pub image_diagonal: f64,
}

impl Default for AssocConfig {
    fn default() -> Self {
        Self {
            eta: 0.5,
            delta: 1.0,
            mu: 1.0,
            beta: 1.0,
            sigma: 1.0,
            tau: 1.0,
            alpha: 1.0,
            gamma: 1.0,
            rbf_bandwidth_embed: 0.5,
            rbf_bandwidth_hook: 0.2,
            visibility_threshold: 0.98,
            image_diagonal: 1920f64.hypot(1080.0),
        }
    }
}

impl AssocConfig {
    pub fn validate(&self) -> Result<(), AssocError> {
        let err = |m: String| Err(AssocError::InvalidConfig(m));
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return err(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        for (name, v) in [
            ("delta", self.delta),
            ("rbf_bandwidth_embed", self.rbf_bandwidth_embed),
            ("rbf_bandwidth_hook", self.rbf_bandwidth_hook),
            ("image_diagonal", self.image_diagonal),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return err(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("mu", self.mu),
            ("beta", self.beta),
            ("sigma", self.sigma),
            ("tau", self.tau),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return err(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if !(self.visibility_threshold > 0.0 && self.visibility_threshold <= 1.0) {
            return err(format!(
                "visibility_threshold must lie in (0, 1], got {}",
                self.visibility_threshold
            ));
        }
        Ok(())
    }
}

/// Intersection over union.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Proposals matched to each subject (`B_k`, `F_k`).
#[derive(Debug, Clone, PartialEq)]
pub struct AssignedSets<'a> {
    pub bodies: Vec<Vec<&'a Proposal>>,
    pub faces: Vec<Vec<&'a Proposal>>,
}

impl AssignedSets<'_> {
    /// Number of ground-truth subjects `S`, including those with empty sets.
    pub fn subject_count(&self) -> usize {
        self.bodies.len()
    }
}

/// Matches each proposal to the subject whose same-kind box it overlaps with
/// IoU strictly above `eta`. A proposal clearing the threshold for several
/// subjects goes to the one of maximum IoU, lowest index on ties.
pub fn assign<'a>(proposals: &'a [Proposal], gt: &GroundTruth, eta: f64) -> AssignedSets<'a> {
    let s = gt.len();
    let mut sets = AssignedSets {
        bodies: vec![Vec::new(); s],
        faces: vec![Vec::new(); s],
    };
    for p in proposals {
        let mut best: Option<(usize, f64)> = None;
        for (k, subject) in gt.subjects().iter().enumerate() {
            let target = match p.kind() {
                BoxKind::Body => Some(&subject.body),
                BoxKind::Face => subject.face.as_ref(),
            };
            let Some(target) = target else { continue };
            let o = iou(p.bbox(), target);
            if o > eta && best.is_none_or(|(_, b)| o > b) {
                best = Some((k, o));
            }
        }
        if let Some((k, _)) = best {
            match p.kind() {
                BoxKind::Body => sets.bodies[k].push(p),
                BoxKind::Face => sets.faces[k].push(p),
            }
        }
    }
    sets
}
