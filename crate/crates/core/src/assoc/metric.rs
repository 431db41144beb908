//! Inference-time face-to-body association.

use super::{AssocConfig, AssocError, Proposal};

/// Dense row-major matrix of bodies (rows) by faces (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// The three similarity ingredients and their combination `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationTerms {
    /// RBF kernel on embedding distance.
    pub embed: Matrix,
    /// RBF kernel on head-hook to face-center distance.
    pub hook: Matrix,
    /// `(C_b + C_f)^2 / 2`.
    pub confidence: Matrix,
    /// `P * M_h + (1 - P) * M_e`, elementwise.
    pub combined: Matrix,
}

pub fn association_terms(
    bodies: &[Proposal],
    faces: &[Proposal],
    cfg: &AssocConfig,
) -> Result<AssociationTerms, AssocError> {
    let hooks = bodies
        .iter()
        .enumerate()
        .map(|(i, b)| b.head_hook().ok_or(AssocError::MissingHeadHook(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let (nb, nf) = (bodies.len(), faces.len());
    let mut embed = Matrix::zeros(nb, nf);
    let mut hook = Matrix::zeros(nb, nf);
    let mut confidence = Matrix::zeros(nb, nf);
    let mut combined = Matrix::zeros(nb, nf);
    let two_se2 = 2.0 * cfg.rbf_bandwidth_embed * cfg.rbf_bandwidth_embed;
    for (i, (body, h)) in bodies.iter().zip(&hooks).enumerate() {
        for (j, face) in faces.iter().enumerate() {
            let me = (-body.embedding().dist_sq(face.embedding()) / two_se2).exp();
            let (fx, fy) = face.center();
            let sh = cfg.rbf_bandwidth_hook * face.bbox().diagonal();
            let d2 = (h.0 - fx).powi(2) + (h.1 - fy).powi(2);
            let mh = (-d2 / (2.0 * sh * sh)).exp();
            let c = body.bbox().confidence + face.bbox().confidence;
            let p = c * c / 2.0;
            embed.set(i, j, me);
            hook.set(i, j, mh);
            confidence.set(i, j, p);
            combined.set(i, j, p * mh + (1.0 - p) * me);
        }
    }
    Ok(AssociationTerms {
        embed,
        hook,
        confidence,
        combined,
    })
}

/// Similarity `S` between every body (row) and face (column).
///
/// With both confidences at 1, `P = 2` and `S` is no longer a convex
/// combination of the two kernels; the formula is applied as is.
pub fn association_metric(
    bodies: &[Proposal],
    faces: &[Proposal],
    cfg: &AssocConfig,
) -> Result<Matrix, AssocError> {
    Ok(association_terms(bodies, faces, cfg)?.combined)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceAssignment {
    Body(usize),
    NotVisible,
}

/// For each face (column of `s`), the body of maximum similarity, or
/// `NotVisible` when that maximum is below the visibility threshold. Ties go
/// to the lowest body index.
pub fn associate(s: &Matrix, cfg: &AssocConfig) -> Vec<FaceAssignment> {
    (0..s.cols())
        .map(|j| {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..s.rows() {
                let v = s.get(i, j);
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((i, v));
                }
            }
            match best {
                Some((i, v)) if v >= cfg.visibility_threshold => FaceAssignment::Body(i),
                _ => FaceAssignment::NotVisible,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox, BoxKind, Embedding};

    fn body(conf: f64, emb: &[f64], hook: (f64, f64)) -> Proposal {
        let b = BBox::new(0.0, 0.0, 10.0, 30.0, BoxKind::Body, conf).unwrap();
        Proposal::body(b, Embedding::new(emb.to_vec()).unwrap(), hook).unwrap()
    }

    fn face(conf: f64, emb: &[f64]) -> Proposal {
        let f = BBox::new(3.0, 1.0, 7.0, 5.0, BoxKind::Face, conf).unwrap();
        Proposal::face(f, Embedding::new(emb.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn identical_embedding_and_hook_at_face_center_gives_one() {
        let cfg = AssocConfig::default();
        let t = association_terms(&[body(0.5, &[1.0, 0.0], (5.0, 3.0))], &[face(0.5, &[1.0, 0.0])], &cfg)
            .unwrap();
        assert_eq!(t.embed.get(0, 0), 1.0);
        assert_eq!(t.hook.get(0, 0), 1.0);
        assert_eq!(t.confidence.get(0, 0), 0.5);
        assert!((t.combined.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_confidence_collapses_to_embedding_kernel() {
        let cfg = AssocConfig::default();
        let t = association_terms(&[body(0.0, &[1.0, 0.2], (0.0, 0.0))], &[face(0.0, &[0.3, 1.0])], &cfg)
            .unwrap();
        assert_eq!(t.confidence.get(0, 0), 0.0);
        assert_eq!(t.combined.get(0, 0), t.embed.get(0, 0));
    }

    #[test]
    fn empty_faces_give_empty_columns() {
        let s = association_metric(&[body(0.9, &[1.0], (0.0, 0.0))], &[], &AssocConfig::default()).unwrap();
        assert_eq!((s.rows(), s.cols()), (1, 0));
        assert!(associate(&s, &AssocConfig::default()).is_empty());
    }

    #[test]
    fn kernels_lie_in_unit_interval() {
        let cfg = AssocConfig::default();
        let t = association_terms(
            &[body(0.3, &[1.0, 0.0], (100.0, 100.0)), body(0.9, &[0.0, 1.0], (5.0, 2.0))],
            &[face(0.8, &[-1.0, 0.0]), face(0.1, &[0.5, 0.5])],
            &cfg,
        )
        .unwrap();
        for m in [&t.embed, &t.hook] {
            assert!(m.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn visibility_threshold_and_ties() {
        let cfg = AssocConfig::default();
        let col = |a: f64, b: f64| Matrix::from_rows(&[vec![a], vec![b]]);
        assert_eq!(associate(&col(0.99, 0.50), &cfg), vec![FaceAssignment::Body(0)]);
        assert_eq!(associate(&col(0.97, 0.50), &cfg), vec![FaceAssignment::NotVisible]);
        assert_eq!(associate(&col(0.99, 0.99), &cfg), vec![FaceAssignment::Body(0)]);
        assert_eq!(associate(&col(0.50, 0.99), &cfg), vec![FaceAssignment::Body(1)]);
        assert_eq!(associate(&col(0.98, 0.0), &cfg), vec![FaceAssignment::Body(0)]);
    }

    #[test]
    fn body_without_hook_is_rejected() {
        // Face-kind proposals passed as bodies have no hook.
        let err = association_metric(&[face(0.5, &[1.0])], &[face(0.5, &[1.0])], &AssocConfig::default());
        assert_eq!(err, Err(AssocError::MissingHeadHook(0)));
    }
}
