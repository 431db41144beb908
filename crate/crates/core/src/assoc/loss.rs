//! Associative-embedding and head-hook losses.

use super::{AssignedSets, AssocConfig, AssocError, GroundTruth, Point, Proposal};
use serde::{Deserialize, Serialize};

/// Per-pair-type loss values and their weighted total `mu * bf + beta * (bb + ff)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub bb: f64,
    pub ff: f64,
    pub bf: f64,
    pub total: f64,
}

impl LossParts {
    fn combine(bb: f64, ff: f64, bf: f64, cfg: &AssocConfig) -> Self {
        Self {
            bb,
            ff,
            bf,
            total: cfg.mu * bf + cfg.beta * (bb + ff),
        }
    }
}

fn center_dist(x: &Proposal, y: &Proposal, cfg: &AssocConfig) -> f64 {
    let (a, b) = (x.center(), y.center());
    (a.0 - b.0).hypot(a.1 - b.1) / cfg.image_diagonal
}

/// Distance-weighted pull over ordered pairs `x != y` of one set, divided by `|set|^2`.
fn weighted_within(set: &[&Proposal], cfg: &AssocConfig) -> f64 {
    if set.len() < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, x) in set.iter().enumerate() {
        for (j, y) in set.iter().enumerate() {
            if i != j {
                acc += center_dist(x, y, cfg).exp() * x.embedding().dist_sq(y.embedding());
            }
        }
    }
    acc / (set.len() * set.len()) as f64
}

/// Mean squared embedding distance over the cross product `a x b`.
fn mean_cross(a: &[&Proposal], b: &[&Proposal], f: impl Fn(f64) -> f64) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut acc = 0.0;
    for x in a {
        for y in b {
            acc += f(x.embedding().dist_sq(y.embedding()));
        }
    }
    acc / (a.len() * b.len()) as f64
}

/// Pulls embeddings of the same subject together.
pub fn pull_loss(sets: &AssignedSets<'_>, cfg: &AssocConfig) -> LossParts {
    let s = sets.subject_count();
    if s == 0 {
        return LossParts::default();
    }
    let mut bb = 0.0;
    let mut ff = 0.0;
    let mut bf = 0.0;
    for k in 0..s {
        bb += weighted_within(&sets.bodies[k], cfg);
        ff += weighted_within(&sets.faces[k], cfg);
        bf += mean_cross(&sets.bodies[k], &sets.faces[k], |d| d);
    }
    let n = s as f64;
    LossParts::combine(bb / n, ff / n, bf / n, cfg)
}

/// Pushes embeddings of different subjects at least `delta` apart (squared).
pub fn push_loss(sets: &AssignedSets<'_>, cfg: &AssocConfig) -> LossParts {
    let s = sets.subject_count();
    if s < 2 {
        return LossParts::default();
    }
    let hinge = |d: f64| (cfg.delta - d).max(0.0);
    let mut bb = 0.0;
    let mut ff = 0.0;
    let mut bf = 0.0;
    for k in 0..s {
        for l in 0..s {
            if k == l {
                continue;
            }
            bb += mean_cross(&sets.bodies[k], &sets.bodies[l], hinge);
            ff += mean_cross(&sets.faces[k], &sets.faces[l], hinge);
            bf += mean_cross(&sets.bodies[k], &sets.faces[l], hinge);
        }
    }
    let n2 = (s * s) as f64;
    LossParts::combine(bb / n2, ff / n2, bf / n2, cfg)
}

/// `sigma * pull + tau * push`.
pub fn embedding_loss(sets: &AssignedSets<'_>, cfg: &AssocConfig) -> f64 {
    cfg.sigma * pull_loss(sets, cfg).total + cfg.tau * push_loss(sets, cfg).total
}

pub fn smooth_l1(x: f64, y: f64) -> f64 {
    let d = (x - y).abs();
    if d < 1.0 {
        0.5 * d * d
    } else {
        d - 0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HookLoss {
    pub l1: f64,
    pub angular: f64,
    pub total: f64,
}

/// Head hooks of each subject's assigned body proposals.
pub fn hooks_from_sets(sets: &AssignedSets<'_>) -> Vec<Vec<Point>> {
    sets.bodies
        .iter()
        .map(|b| b.iter().filter_map(|p| p.head_hook()).collect())
        .collect()
}

/// Smooth-L1 plus scale-invariant angular loss on predicted head hooks.
///
/// `hooks[k]` are the hooks predicted for subject `k`. Angles are measured
/// between vectors from the subject's ground-truth body center to the
/// predicted hook and to the true head center.
pub fn hook_loss(
    hooks: &[Vec<Point>],
    gt: &GroundTruth,
    cfg: &AssocConfig,
) -> Result<HookLoss, AssocError> {
    if hooks.len() != gt.len() {
        return Err(AssocError::SubjectCountMismatch {
            expected: gt.len(),
            actual: hooks.len(),
        });
    }
    let mut l1 = 0.0;
    let mut angular = 0.0;
    for (k, (subject_hooks, subject)) in hooks.iter().zip(gt.subjects()).enumerate() {
        let origin = subject.body.center();
        let target = subject.head_center;
        let vt = (target.0 - origin.0, target.1 - origin.1);
        let nt = vt.0.hypot(vt.1);
        for &h in subject_hooks {
            l1 += smooth_l1(h.0, target.0) + smooth_l1(h.1, target.1);
            let vh = (h.0 - origin.0, h.1 - origin.1);
            let nh = vh.0.hypot(vh.1);
            if nh < 1e-9 || nt < 1e-9 {
                return Err(AssocError::DegenerateVector(k));
            }
            angular += (vh.0 * vt.1 - vh.1 * vt.0).abs() / (nh * nt);
        }
    }
    let n = gt.len() as f64;
    let (l1, angular) = (l1 / n, angular / n);
    Ok(HookLoss {
        l1,
        angular,
        total: cfg.alpha * l1 + cfg.gamma * angular,
    })
}
