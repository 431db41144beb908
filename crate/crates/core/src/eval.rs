//! Verification and identification metrics: TAR@FAR, Rank-N, FNIR@FPIR.
//!
//! Every threshold is drawn from the observed scores and acceptance is
//! strictly greater-than. Tied mates in a ranking are placed behind every
//! non-mate with the same score.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::ScoreMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("empty score population: {0}")]
    EmptyPopulation(&'static str),
    #[error("probe {0} has no mate in a closed-set evaluation")]
    UnmatedProbeInClosedSet(usize),
    #[error("open-set evaluation needs mated and non-mated probes: {0}")]
    MissingPopulation(&'static str),
    #[error("rank {rank} outside 1..={gallery}")]
    InvalidRank { rank: usize, gallery: usize },
    #[error("target rate {0} outside (0, 1)")]
    InvalidTarget(f64),
    #[error("non-finite or missing score at probe {probe}, gallery {gallery}")]
    BadScore { probe: usize, gallery: usize },
    #[error("probe {probe}: {message}")]
    BadMate { probe: String, message: String },
    #[error("score rows must all have {expected} columns")]
    RaggedScores { expected: usize },
}

/// Mated and non-mated 1:1 comparison scores.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledScores {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

/// A 1:N search: probe-by-gallery scores and each probe's mate, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchInstance {
    scores: Vec<Vec<f64>>,
    mates: Vec<Option<usize>>,
    gallery_size: usize,
}

impl SearchInstance {
    pub fn new(scores: Vec<Vec<f64>>, mates: Vec<Option<usize>>) -> Result<Self, EvalError> {
        let gallery_size = scores.first().map_or(0, Vec::len);
        if scores.iter().any(|r| r.len() != gallery_size) {
            return Err(EvalError::RaggedScores {
                expected: gallery_size,
            });
        }
        if mates.len() != scores.len() {
            return Err(EvalError::BadMate {
                probe: format!("#{}", mates.len().min(scores.len())),
                message: format!("{} mates for {} probes", mates.len(), scores.len()),
            });
        }
        for (p, row) in scores.iter().enumerate() {
            if let Some(g) = row.iter().position(|v| !v.is_finite()) {
                return Err(EvalError::BadScore { probe: p, gallery: g });
            }
        }
        for (p, m) in mates.iter().enumerate() {
            if matches!(m, Some(g) if *g >= gallery_size) {
                return Err(EvalError::BadMate {
                    probe: format!("#{p}"),
                    message: "mate index outside gallery".into(),
                });
            }
        }
        Ok(Self {
            scores,
            mates,
            gallery_size,
        })
    }

    /// Builds an instance from a score table and a `probe id -> gallery id`
    /// mapping (`None` for non-mated probes). Every probe must be mapped.
    pub fn from_matrix(
        m: &ScoreMatrix,
        mates: &BTreeMap<String, Option<String>>,
    ) -> Result<Self, EvalError> {
        let col: HashMap<&str, usize> = m
            .gallery_ids()
            .iter()
            .enumerate()
            .map(|(i, g)| (g.as_str(), i))
            .collect();
        let mut rows = Vec::with_capacity(m.probe_ids().len());
        let mut mate_idx = Vec::with_capacity(m.probe_ids().len());
        for (p, pid) in m.probe_ids().iter().enumerate() {
            let row = m
                .row(p)
                .iter()
                .enumerate()
                .map(|(g, s)| s.ok_or(EvalError::BadScore { probe: p, gallery: g }))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
            let mate = mates.get(pid).ok_or_else(|| EvalError::BadMate {
                probe: pid.clone(),
                message: "absent from mate mapping".into(),
            })?;
            mate_idx.push(match mate {
                None => None,
                Some(gid) => Some(*col.get(gid.as_str()).ok_or_else(|| EvalError::BadMate {
                    probe: pid.clone(),
                    message: format!("mate {gid:?} is not a gallery id"),
                })?),
            });
        }
        Self::new(rows, mate_idx)
    }

    pub fn probes(&self) -> usize {
        self.scores.len()
    }

    pub fn gallery_size(&self) -> usize {
        self.gallery_size
    }

    pub fn scores(&self) -> &[Vec<f64>] {
        &self.scores
    }

    pub fn mates(&self) -> &[Option<usize>] {
        &self.mates
    }

    /// Pessimistic rank of the mate: one plus the number of non-mates scoring
    /// at least as high.
    fn mate_rank(&self, probe: usize, mate: usize) -> usize {
        let row = &self.scores[probe];
        let s = row[mate];
        1 + row
            .iter()
            .enumerate()
            .filter(|&(g, &v)| g != mate && v >= s)
            .count()
    }

    /// Genuine scores (probe vs its mate) and impostor scores (every other pair).
    pub fn labeled(&self) -> LabeledScores {
        let mut out = LabeledScores::default();
        for (row, mate) in self.scores.iter().zip(&self.mates) {
            for (g, &v) in row.iter().enumerate() {
                if *mate == Some(g) {
                    out.genuine.push(v);
                } else {
                    out.impostor.push(v);
                }
            }
        }
        out
    }
}

fn check_target(t: f64) -> Result<(), EvalError> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(EvalError::InvalidTarget(t))
    }
}

/// Smallest observed value `t` with `#{v > t} / n <= rate`.
fn threshold_at(values: &[f64], rate: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut i = 0;
    while i < n {
        let t = sorted[i];
        let mut j = i;
        while j < n && sorted[j] == t {
            j += 1;
        }
        if (n - j) as f64 / n as f64 <= rate {
            return t;
        }
        i = j;
    }
    sorted[n - 1]
}

/// True accept rate at the threshold achieving `far_target`; returns `(tar, threshold)`.
pub fn tar_at_far(scores: &LabeledScores, far_target: f64) -> Result<(f64, f64), EvalError> {
    check_target(far_target)?;
    if scores.impostor.is_empty() {
        return Err(EvalError::EmptyPopulation("impostor"));
    }
    if scores.genuine.is_empty() {
        return Err(EvalError::EmptyPopulation("genuine"));
    }
    let t = threshold_at(&scores.impostor, far_target);
    let accepted = scores.genuine.iter().filter(|&&g| g > t).count();
    Ok((accepted as f64 / scores.genuine.len() as f64, t))
}

/// Closed-set Rank-`n` identification rate.
pub fn rank_n(instance: &SearchInstance, n: usize) -> Result<f64, EvalError> {
    if instance.probes() == 0 {
        return Err(EvalError::EmptyPopulation("probes"));
    }
    if n == 0 || n > instance.gallery_size {
        return Err(EvalError::InvalidRank {
            rank: n,
            gallery: instance.gallery_size,
        });
    }
    let mut hits = 0;
    for (p, mate) in instance.mates.iter().enumerate() {
        let mate = mate.ok_or(EvalError::UnmatedProbeInClosedSet(p))?;
        if instance.mate_rank(p, mate) <= n {
            hits += 1;
        }
    }
    Ok(hits as f64 / instance.probes() as f64)
}

/// Open-set false negative identification rate at `fpir_target`; returns
/// `(fnir, threshold)`. A mated probe counts as found only when its mate is
/// strictly top-1 and scores above the threshold.
pub fn fnir_at_fpir(instance: &SearchInstance, fpir_target: f64) -> Result<(f64, f64), EvalError> {
    check_target(fpir_target)?;
    if instance.gallery_size == 0 {
        return Err(EvalError::EmptyPopulation("gallery"));
    }
    let mut non_mated_top = Vec::new();
    let mut mated = Vec::new();
    for (p, (row, mate)) in instance.scores.iter().zip(&instance.mates).enumerate() {
        match mate {
            None => non_mated_top.push(row.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            Some(m) => mated.push((p, *m)),
        }
    }
    if non_mated_top.is_empty() {
        return Err(EvalError::MissingPopulation("no non-mated probes"));
    }
    if mated.is_empty() {
        return Err(EvalError::MissingPopulation("no mated probes"));
    }
    let t = threshold_at(&non_mated_top, fpir_target);
    let misses = mated
        .iter()
        .filter(|&&(p, m)| !(instance.mate_rank(p, m) == 1 && instance.scores[p][m] > t))
        .count();
    Ok((misses as f64 / mated.len() as f64, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub far_target: f64,
    pub fpir_target: f64,
    pub ranks: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            far_target: 0.01,
            fpir_target: 0.01,
            ranks: vec![1, 5, 10, 20],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationCounts {
    pub probes: usize,
    pub mated_probes: usize,
    pub non_mated_probes: usize,
    pub gallery: usize,
    pub genuine_scores: usize,
    pub impostor_scores: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tar_at_far: f64,
    pub far_target: f64,
    pub threshold_used: f64,
    /// Rank-N over mated probes. Ranks above the gallery size report Rank-G.
    pub rank_n_accuracy: BTreeMap<usize, f64>,
    /// `None` when the probe set has no non-mated probes.
    pub fnir_at_fpir: Option<f64>,
    pub fpir_target: f64,
    pub open_set_threshold: Option<f64>,
    pub counts: PopulationCounts,
}

fn percent_label(rate: f64) -> String {
    format!("{}%", rate * 100.0)
}

impl EvalReport {
    /// Aligned text table: TAR@FAR, the configured ranks, FNIR@FPIR, in percent.
    pub fn to_table(&self) -> String {
        let mut cols: Vec<(String, String)> = vec![(
            format!("TAR@{}FAR", percent_label(self.far_target)),
            format!("{:.2}", self.tar_at_far * 100.0),
        )];
        for (r, v) in &self.rank_n_accuracy {
            cols.push((format!("Rank-{r}"), format!("{:.2}", v * 100.0)));
        }
        cols.push((
            format!("FNIR@{}FPIR", percent_label(self.fpir_target)),
            self.fnir_at_fpir
                .map_or_else(|| "n/a".to_string(), |v| format!("{:.2}", v * 100.0)),
        ));
        let widths: Vec<usize> = cols.iter().map(|(h, v)| h.len().max(v.len())).collect();
        let mut out = String::new();
        for (i, (h, _)) in cols.iter().enumerate() {
            let _ = write!(out, "{}{:>w$}", if i > 0 { "  " } else { "" }, h, w = widths[i]);
        }
        out.push('\n');
        for (i, (_, v)) in cols.iter().enumerate() {
            let _ = write!(out, "{}{:>w$}", if i > 0 { "  " } else { "" }, v, w = widths[i]);
        }
        out.push('\n');
        out
    }
}

/// Computes every metric for a search instance. Mated probes drive the
/// closed-set ranks; non-mated probes, when present, enable FNIR@FPIR.
pub fn evaluate(instance: &SearchInstance, cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    let labeled = instance.labeled();
    let (tar, threshold) = tar_at_far(&labeled, cfg.far_target)?;
    check_target(cfg.fpir_target)?;

    let (mut rows, mut mates) = (Vec::new(), Vec::new());
    for (row, m) in instance.scores.iter().zip(&instance.mates) {
        if m.is_some() {
            rows.push(row.clone());
            mates.push(*m);
        }
    }
    let mated_probes = mates.len();
    let closed = SearchInstance::new(rows, mates)?;
    let mut rank_n_accuracy = BTreeMap::new();
    for &r in &cfg.ranks {
        if r == 0 {
            return Err(EvalError::InvalidRank {
                rank: 0,
                gallery: instance.gallery_size,
            });
        }
        rank_n_accuracy.insert(r, rank_n(&closed, r.min(instance.gallery_size))?);
    }

    let non_mated_probes = instance.probes() - mated_probes;
    let (fnir, open_t) = if non_mated_probes > 0 {
        let (f, t) = fnir_at_fpir(instance, cfg.fpir_target)?;
        (Some(f), Some(t))
    } else {
        (None, None)
    };
    Ok(EvalReport {
        tar_at_far: tar,
        far_target: cfg.far_target,
        threshold_used: threshold,
        rank_n_accuracy,
        fnir_at_fpir: fnir,
        fpir_target: cfg.fpir_target,
        open_set_threshold: open_t,
        counts: PopulationCounts {
            probes: instance.probes(),
            mated_probes,
            non_mated_probes,
            gallery: instance.gallery_size,
            genuine_scores: labeled.genuine.len(),
            impostor_scores: labeled.impostor.len(),
        },
    })
}
