//! Cosine scoring, gallery aggregation and multi-modal score fusion.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BBox, Modality};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("zero-norm vector")]
    ZeroVector,
    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("score matrix shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("fusion weights must be nonnegative and sum to 1, got {0:?}")]
    InvalidWeights([f64; 3]),
    #[error("padding threshold {0} outside [0, 1]")]
    InvalidPaddingThreshold(f64),
    #[error("gallery entry {0} has no modality present")]
    NoModality(String),
    #[error("score table parse error: {0}")]
    Parse(String),
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, FusionError> {
    if a.len() != b.len() {
        return Err(FusionError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(FusionError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Element-wise mean of equally sized vectors.
pub fn aggregate_gallery<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Vec<f64>, FusionError> {
    let first = vectors.first().ok_or(FusionError::EmptyInput)?.as_ref();
    let mut acc = vec![0.0; first.len()];
    for v in vectors {
        let v = v.as_ref();
        if v.len() != acc.len() {
            return Err(FusionError::LengthMismatch {
                left: acc.len(),
                right: v.len(),
            });
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// True when more than `padding_threshold` of the body box's height lies
/// above or below the image. Body detections on face-only imagery extend far
/// past the frame.
pub fn is_face_only(body: &BBox, image_h: f64, padding_threshold: f64) -> bool {
    let h = body.height();
    if h <= 0.0 {
        return false;
    }
    let above = (0.0 - body.y_min).clamp(0.0, h);
    let below = (body.y_max - image_h).clamp(0.0, h);
    ((above + below).min(h) / h) > padding_threshold
}

/// Subject-level features, one optional vector per modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalleryEntry {
    pub subject_id: String,
    pub face: Option<Vec<f64>>,
    pub gait: Option<Vec<f64>>,
    pub body: Option<Vec<f64>>,
}

impl GalleryEntry {
    pub fn new(
        subject_id: impl Into<String>,
        face: Option<Vec<f64>>,
        gait: Option<Vec<f64>>,
        body: Option<Vec<f64>>,
    ) -> Result<Self, FusionError> {
        let e = Self {
            subject_id: subject_id.into(),
            face,
            gait,
            body,
        };
        if Modality::ALL.iter().all(|&m| e.get(m).is_none()) {
            return Err(FusionError::NoModality(e.subject_id));
        }
        Ok(e)
    }

    pub fn get(&self, modality: Modality) -> Option<&[f64]> {
        match modality {
            Modality::Face => self.face.as_deref(),
            Modality::Gait => self.gait.as_deref(),
            Modality::Body => self.body.as_deref(),
        }
    }

    pub fn set(&mut self, modality: Modality, v: Option<Vec<f64>>) {
        match modality {
            Modality::Face => self.face = v,
            Modality::Gait => self.gait = v,
            Modality::Body => self.body = v,
        }
    }
}

/// Probes (rows) by gallery subjects (columns); `None` marks a missing score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    probe_ids: Vec<String>,
    gallery_ids: Vec<String>,
    scores: Vec<Option<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ScoreMatrixJson {
    probe_ids: Vec<String>,
    gallery_ids: Vec<String>,
    scores: Vec<Vec<Option<f64>>>,
}

impl ScoreMatrix {
    pub fn new(
        probe_ids: Vec<String>,
        gallery_ids: Vec<String>,
        scores: Vec<Option<f64>>,
    ) -> Result<Self, FusionError> {
        if scores.len() != probe_ids.len() * gallery_ids.len() {
            return Err(FusionError::ShapeMismatch(format!(
                "{} scores for {}x{}",
                scores.len(),
                probe_ids.len(),
                gallery_ids.len()
            )));
        }
        Ok(Self {
            probe_ids,
            gallery_ids,
            scores,
        })
    }

    pub fn from_rows(
        probe_ids: Vec<String>,
        gallery_ids: Vec<String>,
        rows: Vec<Vec<Option<f64>>>,
    ) -> Result<Self, FusionError> {
        if rows.len() != probe_ids.len() || rows.iter().any(|r| r.len() != gallery_ids.len()) {
            return Err(FusionError::ShapeMismatch("ragged score rows".into()));
        }
        Self::new(probe_ids, gallery_ids, rows.concat())
    }

    pub fn probe_ids(&self) -> &[String] {
        &self.probe_ids
    }

    pub fn gallery_ids(&self) -> &[String] {
        &self.gallery_ids
    }

    pub fn scores(&self) -> &[Option<f64>] {
        &self.scores
    }

    pub fn get(&self, probe: usize, gallery: usize) -> Option<f64> {
        self.scores[probe * self.gallery_ids.len() + gallery]
    }

    pub fn row(&self, probe: usize) -> &[Option<f64>] {
        let g = self.gallery_ids.len();
        &self.scores[probe * g..(probe + 1) * g]
    }

    fn check_same_shape(&self, other: &ScoreMatrix) -> Result<(), FusionError> {
        if self.probe_ids != other.probe_ids || self.gallery_ids != other.gallery_ids {
            return Err(FusionError::ShapeMismatch(
                "probe or gallery ids differ between modalities".into(),
            ));
        }
        Ok(())
    }

    /// CSV with a header of gallery ids after one leading cell, one row per
    /// probe, and empty cells for missing scores.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["probe_id".to_string()];
        header.extend(self.gallery_ids.iter().cloned());
        out.write_record(&header)?;
        for (p, id) in self.probe_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(
                self.row(p)
                    .iter()
                    .map(|s| s.map(|v| format!("{v:?}")).unwrap_or_default()),
            );
            out.write_record(&rec)?;
        }
        out.flush()
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, FusionError> {
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(r);
        let header = rd.headers().map_err(|e| FusionError::Parse(e.to_string()))?;
        if header.is_empty() {
            return Err(FusionError::Parse("missing header row".into()));
        }
        let gallery_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut probe_ids = Vec::new();
        let mut scores = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| FusionError::Parse(e.to_string()))?;
            if rec.len() != gallery_ids.len() + 1 {
                return Err(FusionError::ShapeMismatch(format!(
                    "row {} has {} cells, expected {}",
                    line + 2,
                    rec.len(),
                    gallery_ids.len() + 1
                )));
            }
            probe_ids.push(rec[0].to_string());
            for cell in rec.iter().skip(1) {
                scores.push(if cell.is_empty() {
                    None
                } else {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| FusionError::Parse(format!("bad score {cell:?}")))?;
                    if !v.is_finite() {
                        return Err(FusionError::Parse(format!("non-finite score {cell:?}")));
                    }
                    Some(v)
                });
            }
        }
        Self::new(probe_ids, gallery_ids, scores)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let g = self.gallery_ids.len().max(1);
        let rows = if self.gallery_ids.is_empty() {
            vec![Vec::new(); self.probe_ids.len()]
        } else {
            self.scores.chunks(g).map(<[_]>::to_vec).collect()
        };
        serde_json::to_value(ScoreMatrixJson {
            probe_ids: self.probe_ids.clone(),
            gallery_ids: self.gallery_ids.clone(),
            scores: rows,
        })
        .expect("score matrix serializes")
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self, FusionError> {
        let j: ScoreMatrixJson =
            serde_json::from_value(value).map_err(|e| FusionError::Parse(e.to_string()))?;
        Self::from_rows(j.probe_ids, j.gallery_ids, j.scores)
    }
}

/// Cosine scores of every probe against every gallery entry for one
/// modality; missing when either side lacks that modality.
pub fn score_modality(
    probes: &[GalleryEntry],
    gallery: &[GalleryEntry],
    modality: Modality,
) -> Result<ScoreMatrix, FusionError> {
    let rows: Vec<Vec<Option<f64>>> = probes
        .par_iter()
        .map(|p| {
            gallery
                .iter()
                .map(|g| match (p.get(modality), g.get(modality)) {
                    (Some(a), Some(b)) => cosine(a, b).map(Some),
                    _ => Ok(None),
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    ScoreMatrix::from_rows(
        probes.iter().map(|p| p.subject_id.clone()).collect(),
        gallery.iter().map(|g| g.subject_id.clone()).collect(),
        rows,
    )
}

/// Per-modality score matrices sharing one probe/gallery layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityScores {
    pub face: ScoreMatrix,
    pub gait: ScoreMatrix,
    pub body: ScoreMatrix,
}

impl ModalityScores {
    pub fn from_entries(probes: &[GalleryEntry], gallery: &[GalleryEntry]) -> Result<Self, FusionError> {
        Ok(Self {
            face: score_modality(probes, gallery, Modality::Face)?,
            gait: score_modality(probes, gallery, Modality::Gait)?,
            body: score_modality(probes, gallery, Modality::Body)?,
        })
    }

    pub fn get(&self, modality: Modality) -> &ScoreMatrix {
        match modality {
            Modality::Face => &self.face,
            Modality::Gait => &self.gait,
            Modality::Body => &self.body,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Face, gait, body.
    pub modality_weights: [f64; 3],
    pub imputed_value: f64,
    pub padding_threshold: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            modality_weights: [1.0 / 3.0; 3],
            imputed_value: 0.0,
            padding_threshold: 0.25,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        let w = self.modality_weights;
        let sum: f64 = w.iter().sum();
        if w.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(FusionError::InvalidWeights(w));
        }
        if !(0.0..=1.0).contains(&self.padding_threshold) {
            return Err(FusionError::InvalidPaddingThreshold(self.padding_threshold));
        }
        Ok(())
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `sum(w * s) / sum(w)` evaluated in double-double, so an equal-weight
/// fusion is the correctly rounded mean of its inputs even though `1/3` is
/// not representable. Zero-weight slots are skipped, which keeps a one-hot
/// weight vector bit-exact (signed zeros included).
fn weighted_mean(terms: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut nh, mut nl, mut dh, mut dl) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut any = false;
    for (w, s) in terms {
        if w == 0.0 {
            continue;
        }
        let p = w * s;
        let pe = w.mul_add(s, -p);
        if any {
            let (h, e) = two_sum(nh, p);
            nh = h;
            nl += e + pe;
            let (h, e) = two_sum(dh, w);
            dh = h;
            dl += e;
        } else {
            (nh, nl, dh, dl) = (p, pe, w, 0.0);
            any = true;
        }
    }
    if !any {
        return 0.0;
    }
    let q = nh / dh;
    let r = (-q).mul_add(dh, nh) + nl - q * dl;
    if r == 0.0 {
        q
    } else {
        q + r / dh
    }
}

/// Weighted combination of all three modality slots, with missing scores
/// replaced by `imputed_value` first. A missing modality therefore pulls the
/// fused score toward the imputed value instead of being renormalized away.
///
/// Weights sum to one, so this is `sum(w * s)`; it is evaluated as a weighted
/// mean for accuracy (see [`weighted_mean`]).
pub fn fuse(scores: &ModalityScores, cfg: &FusionConfig) -> Result<ScoreMatrix, FusionError> {
    cfg.validate()?;
    scores.face.check_same_shape(&scores.gait)?;
    scores.face.check_same_shape(&scores.body)?;
    let mats = [&scores.face, &scores.gait, &scores.body];
    let fused = (0..scores.face.scores.len())
        .map(|i| {
            Some(weighted_mean(
                mats.iter()
                    .zip(&cfg.modality_weights)
                    .map(|(m, &w)| (w, m.scores[i].unwrap_or(cfg.imputed_value))),
            ))
        })
        .collect();
    ScoreMatrix::new(
        scores.face.probe_ids.clone(),
        scores.face.gallery_ids.clone(),
        fused,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn single(v: Option<f64>) -> ScoreMatrix {
        ScoreMatrix::new(ids("p", 1), ids("g", 1), vec![v]).unwrap()
    }

    fn triple(f: Option<f64>, g: Option<f64>, b: Option<f64>) -> ModalityScores {
        ModalityScores {
            face: single(f),
            gait: single(g),
            body: single(b),
        }
    }

    #[test]
    fn cosine_examples() {
        let v = [0.3, -1.2, 4.0];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine(&v, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(FusionError::ZeroVector));
        assert!(matches!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(FusionError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn aggregation_examples() {
        assert_eq!(aggregate_gallery(&[vec![1.0, -2.0]]).unwrap(), vec![1.0, -2.0]);
        assert_eq!(
            aggregate_gallery(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            vec![0.5, 0.5]
        );
        assert_eq!(
            aggregate_gallery(&[vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0], vec![2.0, 2.0, 2.0]]).unwrap(),
            vec![2.0, 2.0, 2.0]
        );
        assert_eq!(aggregate_gallery::<Vec<f64>>(&[]), Err(FusionError::EmptyInput));
        assert!(aggregate_gallery(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn face_only_examples() {
        let inside = BBox::body(10.0, 10.0, 20.0, 90.0).unwrap();
        assert!(!is_face_only(&inside, 100.0, 0.25));
        let over = BBox::body(0.0, -50.0, 10.0, 50.0).unwrap();
        assert!(is_face_only(&over, 100.0, 0.25));
        let edge = BBox::body(0.0, 0.0, 10.0, 100.0).unwrap();
        assert!(!is_face_only(&edge, 100.0, 0.25));
    }

    #[test]
    fn fuse_examples() {
        let cfg = FusionConfig::default();
        let f = |s: ModalityScores| fuse(&s, &cfg).unwrap().get(0, 0).unwrap();
        assert!((f(triple(Some(0.5), Some(0.5), Some(0.5))) - 0.5).abs() < 1e-15);
        assert_eq!(f(triple(Some(0.9), None, Some(0.3))), 0.4);
        assert_eq!(f(triple(None, None, None)), 0.0);
    }

    #[test]
    fn fuse_rejects_bad_inputs() {
        let mut s = triple(Some(0.1), Some(0.2), Some(0.3));
        s.gait = ScoreMatrix::new(ids("q", 1), ids("g", 1), vec![Some(0.2)]).unwrap();
        assert!(matches!(fuse(&s, &FusionConfig::default()), Err(FusionError::ShapeMismatch(_))));
        let cfg = FusionConfig {
            modality_weights: [0.5, 0.5, 0.5],
            ..Default::default()
        };
        assert!(matches!(
            fuse(&triple(None, None, None), &cfg),
            Err(FusionError::InvalidWeights(_))
        ));
    }

    #[test]
    fn missing_modality_in_gallery_is_missing_score() {
        let probes = [GalleryEntry::new("p", Some(vec![1.0, 0.0]), Some(vec![1.0]), None).unwrap()];
        let gallery = [GalleryEntry::new("g", Some(vec![1.0, 1.0]), None, Some(vec![2.0])).unwrap()];
        let s = ModalityScores::from_entries(&probes, &gallery).unwrap();
        assert!((s.face.get(0, 0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.gait.get(0, 0), None);
        assert_eq!(s.body.get(0, 0), None);
        assert!(GalleryEntry::new("x", None, None, None).is_err());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let m = ScoreMatrix::from_rows(
            ids("p", 2),
            ids("g", 3),
            vec![
                vec![Some(0.1), None, Some(-0.25)],
                vec![Some(1.0 / 3.0), Some(0.0), None],
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("probe_id,g0,g1,g2\np0,0.1,,-0.25\n"));
        assert_eq!(ScoreMatrix::read_csv(buf.as_slice()).unwrap(), m);
        assert_eq!(ScoreMatrix::from_json(m.to_json()).unwrap(), m);
        assert!(ScoreMatrix::read_csv("probe_id,g0\np0,abc\n".as_bytes()).is_err());
        assert!(ScoreMatrix::read_csv("probe_id,g0\np0,1,2\n".as_bytes()).is_err());
    }

    fn score() -> impl Strategy<Value = Option<f64>> {
        prop::option::weighted(0.8, -1.0f64..=1.0)
    }

    proptest! {
        #[test]
        fn fused_scores_stay_in_range(f in score(), g in score(), b in score(),
                                      w in (0.0f64..1.0, 0.0f64..1.0)) {
            let (w0, w1) = (w.0, (1.0 - w.0) * w.1);
            let cfg = FusionConfig { modality_weights: [w0, w1, 1.0 - w0 - w1], ..Default::default() };
            prop_assume!(cfg.validate().is_ok());
            let v = fuse(&triple(f, g, b), &cfg).unwrap().get(0, 0).unwrap();
            prop_assert!((-1.0..=1.0).contains(&v));
        }

        #[test]
        fn fusion_is_monotone(f in -1.0f64..1.0, g in score(), b in score(), bump in 0.0f64..1.0) {
            let cfg = FusionConfig::default();
            let lo = fuse(&triple(Some(f), g, b), &cfg).unwrap().get(0, 0).unwrap();
            let hi = fuse(&triple(Some((f + bump).min(1.0)), g, b), &cfg).unwrap().get(0, 0).unwrap();
            prop_assert!(hi >= lo);
        }

        #[test]
        fn one_hot_weights_return_face_matrix(vals in prop::collection::vec((-1.0f64..=1.0, -1.0f64..=1.0, -1.0f64..=1.0), 6)) {
            let m = |k: usize| ScoreMatrix::new(ids("p", 2), ids("g", 3),
                vals.iter().map(|t| Some([t.0, t.1, t.2][k])).collect()).unwrap();
            let s = ModalityScores { face: m(0), gait: m(1), body: m(2) };
            let cfg = FusionConfig { modality_weights: [1.0, 0.0, 0.0], ..Default::default() };
            let out = fuse(&s, &cfg).unwrap();
            for (a, b) in out.scores().iter().zip(s.face.scores()) {
                prop_assert_eq!(a.unwrap().to_bits(), b.unwrap().to_bits());
            }
        }

        #[test]
        fn aggregation_is_permutation_invariant(mut vs in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..6)) {
            let a = aggregate_gallery(&vs).unwrap();
            vs.reverse();
            let b = aggregate_gallery(&vs).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let c = vec![vs[0].clone(); 4];
            let d = aggregate_gallery(&c).unwrap();
            for (x, y) in d.iter().zip(&vs[0]) {
                prop_assert!((x - y).abs() <= 1e-15 * y.abs().max(1.0));
            }
        }
    }
}
